"""Maximum-likelihood EM for the beam mixture."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize_scalar
from scipy.special import logsumexp

from ..beam_model import MAX_RANGE_EPS, BeamParams, log_weighted_components, p_prime_from_weights

SIGMA_FLOOR = 1e-6


class ZeroLikelihoodError(ValueError):
    """Every mixture component gives zero likelihood for some row."""

    def __init__(self, row, z, z_star):
        super().__init__(f"row {row} (z={z!r}, z_star={z_star!r}) has zero "
                         "likelihood under every component")
        self.row = row


# default starting values for the ML fit
DEFAULT_ML_INIT = dict(sigma_m=0.5, p_prime=0.4, pi3=0.2, pi4=0.1)


def default_ml_init(z_max):
    return BeamParams(z_max=z_max, **DEFAULT_ML_INIT)


@dataclass
class EMTrace:
    """Per-iteration record; ``loglik[t]`` belongs to ``params[t]``."""

    loglik: list = field(default_factory=list)
    params: list = field(default_factory=list)
    sigma_skipped: list = field(default_factory=list)

    @property
    def iterations(self):
        return len(self.sigma_skipped)

    def is_monotone(self, rtol=1e-8):
        ll = np.asarray(self.loglik)
        return bool(np.all(np.diff(ll) >= -rtol * np.abs(ll[:-1])))


def normalize_log_rows(logc, dataset):
    """Row-normalise log weights; returns ``(resp, row_loglik)``."""
    norm = logsumexp(logc, axis=1)
    bad = np.flatnonzero(~np.isfinite(norm))
    if bad.size:
        i = int(bad[0])
        raise ZeroLikelihoodError(i, float(dataset.z[i]), float(dataset.z_star[i]))
    return np.exp(logc - norm[:, None]), norm


def ml_responsibilities(dataset, params, eps=MAX_RANGE_EPS):
    """Posterior cause probabilities per row, shape ``(J, 4)``.

    Computed in the log domain, so rows whose densities all underflow still
    normalise correctly. A reading inside the max-range band is scored as
    the event "reading in the band": the max-range atom competes with the
    band mass of the continuous components rather than their density.
    """
    logc = log_weighted_components(dataset.z, dataset.z_star, params, eps, band_mass=True)
    return normalize_log_rows(logc, dataset)[0]


def loglik(dataset, params, eps=MAX_RANGE_EPS):
    """Observed-data log-likelihood (in-band readings scored as band events)."""
    logc = log_weighted_components(dataset.z, dataset.z_star, params, eps, band_mass=True)
    return float(math.fsum(logsumexp(logc, axis=1)))


def _q_occlusion(pp, J1, J2, w2, t):
    """Part of the expected complete-data log-likelihood that depends on p'."""
    with np.errstate(divide="ignore", invalid="ignore"):
        val = ((J1 + J2) * math.log1p(-pp) + (J2 * math.log(pp) if J2 > 0 else 0.0)
               - 2.0 * float(w2 @ np.log1p(-pp * t)))
    return val if np.isfinite(val) else -np.inf


def maximize_p_prime(resp, dataset, candidates=()):
    """Occlusion probability maximising the expected complete-data likelihood.

    ``p'`` sets both the hit/occlusion split and the shape of the occlusion
    density, so the closed-form ratio ``J2 / (J1 + J2)`` is only optimal for
    the split. A bounded 1-D search over the full objective is compared
    against ``candidates`` and the best value wins, which keeps every
    iteration a (generalised) EM step.
    """
    J1, J2 = float(resp[:, 0].sum()), float(resp[:, 1].sum())
    if not J2 > 0:
        return 0.0
    if not J1 > 0:
        return 1.0 - 1e-12
    w2 = resp[:, 1]
    use = w2 > 0
    w2 = w2[use]
    zs = dataset.z_star[use]
    t = np.clip((zs - dataset.z[use]) / zs, 0.0, 1.0)
    q = lambda pp: _q_occlusion(pp, J1, J2, w2, t)  # noqa: E731
    res = minimize_scalar(lambda pp: -q(pp), bounds=(1e-12, 1.0 - 1e-12), method="bounded",
                          options={"xatol": 1e-12})
    options = [float(res.x), J2 / (J1 + J2), *candidates]
    options = [min(max(c, 0.0), 1.0 - 1e-12) for c in options]
    return max(options, key=q)


def ml_m_step(dataset, resp, z_max, old, p_prime_update="exact"):
    """M-step; returns ``(params, sigma_skipped)``.

    ``p_prime_update="ratio"`` uses ``pi2 / (1 - pi3 - pi4)`` verbatim, which
    ignores the dependence of the occlusion density on ``p'``.
    """
    J = resp.shape[0]
    Js = resp.sum(axis=0)
    pi = Js / J
    skipped = not Js[0] > 0
    if skipped:
        sigma = old.sigma_m
    else:
        r2 = (dataset.z - dataset.z_star) ** 2
        sigma = max(math.sqrt(float(resp[:, 0] @ r2) / Js[0]), SIGMA_FLOOR)
    if p_prime_update == "ratio":
        pp = p_prime_from_weights(pi[1], pi[2], pi[3])
    elif p_prime_update == "exact":
        pp = maximize_p_prime(resp, dataset, candidates=(old.p_prime,))
    else:
        raise ValueError(f"unknown p_prime_update {p_prime_update!r}")
    return BeamParams(sigma, pp, float(pi[2]), float(pi[3]), z_max), skipped


def ml_em_fit(dataset, init, iters=30, eps=MAX_RANGE_EPS, tol=None, p_prime_update="exact"):
    """EM over the mixture weights and the hit noise.

    The hit mean is pinned to each row's ``z_star``. ``p_prime_update``
    selects the occlusion update, see :func:`ml_m_step`. Returns the final
    parameters and an :class:`EMTrace` whose ``loglik`` has ``iters + 1``
    entries (one per parameter set visited). With ``tol`` set, iteration
    stops early once no parameter moves by more than ``tol``.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    z = np.clip(dataset.z, 0.0, init.z_max)
    ds = type(dataset)(z, dataset.z_star)
    params = init
    trace = EMTrace()
    for _ in range(iters):
        logc = log_weighted_components(ds.z, ds.z_star, params, eps, band_mass=True)
        resp, row_ll = normalize_log_rows(logc, ds)
        trace.loglik.append(float(math.fsum(row_ll)))
        trace.params.append(params)
        new, skipped = ml_m_step(ds, resp, init.z_max, params, p_prime_update)
        trace.sigma_skipped.append(skipped)
        moved = max(abs(a - b) for a, b in zip(
            (new.sigma_m, new.p_prime, new.pi3, new.pi4),
            (params.sigma_m, params.p_prime, params.pi3, params.pi4)))
        params = new
        if tol is not None and moved < tol:
            break
    trace.loglik.append(loglik(ds, params, eps))
    trace.params.append(params)
    return params, trace
