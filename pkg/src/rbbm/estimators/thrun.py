"""Maximum-likelihood EM for the exponential-short baseline mixture."""
from __future__ import annotations

import math

import numpy as np
from scipy.optimize import brentq

from ..beam_model import (LAMBDA_FLOOR, MAX_RANGE_EPS, ThrunParams, max_band_log_width,
                          thrun_components)
from .ml import SIGMA_FLOOR, EMTrace, normalize_log_rows

DEFAULT_THRUN_INIT = dict(sigma_m=0.5, z_hit=0.4, z_short=0.3, z_max_w=0.1,
                         z_rand=0.2, lambda_short=0.1)
LAMBDA_CEIL = 1e6


def default_thrun_init(z_max):
    return ThrunParams(z_max=z_max, **DEFAULT_THRUN_INIT)


def _log_components(dataset, params, eps):
    with np.errstate(divide="ignore"):
        out = (np.log(thrun_components(dataset.z, dataset.z_star, params, eps))
               + np.log(params.weights))
    # hit, short and random are continuous; column 2 is the max-range atom
    out[:, [0, 1, 3]] += max_band_log_width(dataset.z, params.z_max, eps)[:, None]
    return np.where(np.isnan(out), -np.inf, out)


def thrun_responsibilities(dataset, params, eps=MAX_RANGE_EPS):
    return normalize_log_rows(_log_components(dataset, params, eps), dataset)[0]


def _truncated_mean_gap(lam, w, z, z_star):
    # d/d lambda of the weighted truncated-exponential log-likelihood, up to sign
    x = lam * z_star
    tail = np.where(x > 700, 0.0, z_star / np.expm1(np.minimum(x, 700)))
    return float(w @ (1.0 / lam - tail) - w @ z)


def truncated_exponential_rate(w, z, z_star, lam_old):
    """Weighted ML rate of an exponential truncated to ``[0, z_star]``.

    Solves ``sum w z = sum w (1/lambda - z_star / (exp(lambda z_star) - 1))``.
    The right side falls from ``sum w z_star / 2`` towards zero as lambda
    grows, so the root is unique; data with a mean beyond the midpoint push
    the rate onto its floor.
    """
    if not w.sum() > 0:
        return lam_old
    lo, hi = LAMBDA_FLOOR, LAMBDA_CEIL
    f_lo = _truncated_mean_gap(lo, w, z, z_star)
    if f_lo <= 0:
        return lo
    if _truncated_mean_gap(hi, w, z, z_star) >= 0:
        return hi
    root = brentq(lambda t: _truncated_mean_gap(math.exp(t), w, z, z_star),
                  math.log(lo), math.log(hi), xtol=1e-14, rtol=1e-12)
    return math.exp(root)


def thrun_ml_fit(dataset, init, iters=30, eps=MAX_RANGE_EPS, tol=None):
    """EM for the baseline; returns ``(ThrunParams, EMTrace)``.

    Weights and hit noise update as in the beam-mixture EM; the short-reading
    rate is the exact weighted ML rate of the truncated exponential.
    """
    if iters < 1:
        raise ValueError("iters must be >= 1")
    z = np.clip(dataset.z, 0.0, init.z_max)
    ds = type(dataset)(z, dataset.z_star)
    params = init
    trace = EMTrace()
    for _ in range(iters):
        resp, row_ll = normalize_log_rows(_log_components(ds, params, eps), ds)
        trace.loglik.append(float(math.fsum(row_ll)))
        trace.params.append(params)
        Js = resp.sum(axis=0)
        w = Js / Js.sum()
        skipped = not Js[0] > 0
        sigma = params.sigma_m if skipped else max(
            math.sqrt(float(resp[:, 0] @ (ds.z - ds.z_star) ** 2) / Js[0]), SIGMA_FLOOR)
        lam = truncated_exponential_rate(resp[:, 1], ds.z, ds.z_star, params.lambda_short)
        new = ThrunParams(sigma, float(w[0]), float(w[1]), float(w[2]), float(w[3]),
                          lam, init.z_max)
        trace.sigma_skipped.append(skipped)
        moved = max(abs(a - b) for a, b in zip(
            (new.sigma_m, *new.weights, new.lambda_short),
            (params.sigma_m, *params.weights, params.lambda_short)))
        params = new
        if tol is not None and moved < tol:
            break
    resp, row_ll = normalize_log_rows(_log_components(ds, params, eps), ds)
    trace.loglik.append(float(math.fsum(row_ll)))
    trace.params.append(params)
    return params, trace
