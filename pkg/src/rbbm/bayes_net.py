"""Ancestral sampling of the generative beam network.

Per draw: a random reading with probability ``pi3``, a max-range reading
with probability ``pi4``, otherwise the network runs. It draws the number
of unmodeled objects ``n`` (geometric), places them uniformly on
``[0, z_max]``, keeps the ones in front of the mapped object as occluders,
and emits a Gaussian reading around the nearest occluder (or around
``z_star`` when there is none). Readings are clipped to ``[0, z_max]``.

Randomness: numpy's PCG64 generator. Draws are produced in fixed blocks of
``BLOCK_SIZE`` rows, each seeded by a child of ``SeedSequence(seed)``, so
the output only depends on the seed and never on ``n_jobs``.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from scipy.special import ndtr

from .beam_model import (BeamParams, OcclusionEnvironment, ThrunParams, p_occl,
                         p_prime_from_environment, rbbm_continuous_density)
from .dataset import Dataset
from .metrics import BinnedDistribution, build_histogram, default_edges, discretize_density, hellinger_distance

BLOCK_SIZE = 1 << 16


class Cause(str, enum.Enum):
    HIT = "hit"
    OCCLUDED = "occluded"
    RANDOM = "random"
    MAXRANGE = "maxrange"


_CAUSES = np.array([c.value for c in Cause])
_HIT, _OCCLUDED, _RANDOM, _MAXRANGE = range(4)


@dataclass(frozen=True)
class NetParams:
    p: float
    sigma_m: float
    pi3: float
    pi4: float
    z_max: float

    def __post_init__(self):
        if not 0 <= self.p < 1:
            raise ValueError(f"p must lie in [0, 1), got {self.p}")
        if not self.sigma_m > 0:
            raise ValueError(f"sigma_m must be > 0, got {self.sigma_m}")
        if not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        if self.pi3 < 0 or self.pi4 < 0 or self.pi3 + self.pi4 > 1:
            raise ValueError("need pi3 >= 0, pi4 >= 0 and pi3 + pi4 <= 1")

    def environment(self, z_star):
        return OcclusionEnvironment.from_ranges(self.p, z_star, self.z_max)

    def beam_params(self, z_star):
        """Closed-form beam parameters implied at expected range ``z_star``."""
        pp = p_prime_from_environment(self.environment(z_star))
        return BeamParams(self.sigma_m, pp, self.pi3, self.pi4, self.z_max)


@dataclass(frozen=True)
class SampleTrace:
    cause: Cause
    n: int
    k: int
    z_occl_star: float | None
    z: float


@dataclass(frozen=True)
class BeamSamples:
    """Column-wise traces; ``z_occl_star`` is nan unless the cause is occluded."""

    z: np.ndarray
    z_star: np.ndarray
    cause_code: np.ndarray
    n: np.ndarray
    k: np.ndarray
    z_occl_star: np.ndarray

    @property
    def cause(self):
        return _CAUSES[self.cause_code]

    def __len__(self):
        return self.z.size

    def trace(self, i):
        code = int(self.cause_code[i])
        zo = float(self.z_occl_star[i]) if code == _OCCLUDED else None
        return SampleTrace(Cause(_CAUSES[code]), int(self.n[i]), int(self.k[i]),
                           zo, float(self.z[i]))


def _seed_sequence(seed):
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, np.random.Generator):
        return np.random.SeedSequence(int(seed.integers(2**63)))
    return np.random.SeedSequence(seed)


def _sample_block(z_star, params, rng):
    m = z_star.size
    cause = np.full(m, _HIT, dtype=np.int8)
    u = rng.random(m)
    cause[u < params.pi3] = _RANDOM
    cause[(u >= params.pi3) & (u < params.pi3 + params.pi4)] = _MAXRANGE

    n = np.zeros(m, dtype=np.int64)
    k = np.zeros(m, dtype=np.int64)
    z_occl = np.full(m, np.nan)
    z = np.empty(m)

    net = np.flatnonzero(cause == _HIT)
    if params.p > 0:
        # inverse CDF of P(n) = (1 - p) p^n, using P(N >= n) = p^n
        v = 1.0 - rng.random(net.size)
        n[net] = np.floor(np.log(v) / math.log(params.p)).astype(np.int64)
    counts = n[net]
    positions = rng.uniform(0.0, params.z_max, int(counts.sum()))
    owner = np.repeat(np.arange(net.size), counts)
    occluding = positions < z_star[net][owner]
    k_net = np.bincount(owner[occluding], minlength=net.size)
    nearest = np.full(net.size, np.inf)
    np.minimum.at(nearest, owner[occluding], positions[occluding])
    k[net] = k_net
    occluded = k_net > 0
    centre = np.where(occluded, nearest, z_star[net])
    z[net] = centre + params.sigma_m * rng.standard_normal(net.size)
    cause[net[occluded]] = _OCCLUDED
    z_occl[net[occluded]] = nearest[occluded]

    rand = cause == _RANDOM
    z[rand] = rng.uniform(0.0, params.z_max, int(rand.sum()))
    z[cause == _MAXRANGE] = params.z_max
    np.clip(z, 0.0, params.z_max, out=z)
    return z, cause, n, k, z_occl


def sample_beams(z_star, params, seed, n_jobs=1):
    """Draw one reading per entry of ``z_star``."""
    z_star = np.atleast_1d(np.asarray(z_star, dtype=float))
    if np.any(z_star <= 0) or np.any(z_star > params.z_max):
        raise ValueError("every z_star must lie in (0, z_max]")
    nblocks = max(1, math.ceil(z_star.size / BLOCK_SIZE))
    children = _seed_sequence(seed).spawn(nblocks)

    def run(i):
        sl = slice(i * BLOCK_SIZE, (i + 1) * BLOCK_SIZE)
        return _sample_block(z_star[sl], params, np.random.default_rng(children[i]))

    if n_jobs > 1 and nblocks > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            parts = list(pool.map(run, range(nblocks)))
    else:
        parts = [run(i) for i in range(nblocks)]
    z, cause, n, k, zo = (np.concatenate(col) for col in zip(*parts))
    return BeamSamples(z, z_star, cause, n, k, zo)


def sample_beam(z_star, params, seed):
    """Single ancestral draw, returned as a :class:`SampleTrace`."""
    if not z_star > 0:
        raise ValueError(f"z_star must be > 0, got {z_star}")
    return sample_beams([z_star], params, seed).trace(0)


def sample_dataset(z_stars, params, per_range, seed, n_jobs=1, with_cause=True):
    """``per_range`` draws for each expected range, in input order."""
    if per_range < 1:
        raise ValueError(f"per_range must be >= 1, got {per_range}")
    zs = np.repeat(np.asarray(z_stars, dtype=float), per_range)
    s = sample_beams(zs, params, seed, n_jobs=n_jobs)
    return Dataset(s.z, s.z_star, s.cause if with_cause else None)


def analytic_histogram(z_star, params, edges, eps=None):
    """Bin masses of the closed-form beam density, max-range atom included."""
    bp = params.beam_params(z_star) if isinstance(params, NetParams) else params
    return discretize_density(
        lambda x: rbbm_continuous_density(x, z_star, bp), edges,
        atom_at=(bp.z_max, bp.pi4), breakpoints=(z_star,))


def validate_against_analytic(z_star, params, draws, bins, seed):
    """Hellinger distance between simulated readings and the closed form."""
    if draws < 100:
        raise ValueError("need at least 100 draws")
    if bins < 10:
        raise ValueError("need at least 10 bins")
    edges = default_edges(params.z_max, bins)
    s = sample_beams(np.full(draws, float(z_star)), params, seed)
    return hellinger_distance(build_histogram(s.z, edges),
                              analytic_histogram(z_star, params, edges))


def clipped_histogram(z_star, params, edges, step=1e-4):
    """Exact bin masses of the simulated readings, clipping included.

    Unlike :func:`analytic_histogram` this keeps the Gaussian spread around
    each occluder (integrated over occluder positions with a midpoint sum of
    width ``step``) and folds the mass pushed outside ``[0, z_max]`` into the
    end bins, as the sampler does.
    """
    bp = params.beam_params(z_star) if isinstance(params, NetParams) else params
    edges = np.asarray(edges, dtype=float)
    if edges[0] != 0 or edges[-1] != bp.z_max:
        raise ValueError("edges must span [0, z_max]")
    inner = edges[1:-1]

    def gauss_mass(centres, weights):
        c = ndtr((inner[None, :] - centres[:, None]) / bp.sigma_m)
        cdf = np.hstack([np.zeros((len(centres), 1)), c, np.ones((len(centres), 1))])
        return weights @ np.diff(cdf, axis=1)

    w = bp.weights
    mass = w.pi1 * gauss_mass(np.array([z_star]), np.ones(1))
    if bp.p_prime > 0:
        n = max(1, int(math.ceil(z_star / step)))
        h = z_star / n
        s = (np.arange(n) + 0.5) * h
        occ = p_occl(s, z_star, bp.p_prime) * h
        mass = mass + w.pi2 * gauss_mass(s, occ / occ.sum())
    mass = mass + w.pi3 * np.diff(edges) / bp.z_max
    mass[-1] += w.pi4
    return BinnedDistribution(edges, mass / mass.sum())


def bootstrap_self_distance(mass, draws, reps=1000, quantile=0.99, seed=0):
    """Quantile of the Hellinger distance between two independent histograms.

    Both histograms hold ``draws`` multinomial draws from ``mass``.
    """
    mass = np.asarray(mass, dtype=float)
    rng = np.random.default_rng(_seed_sequence(seed))
    a = rng.multinomial(draws, mass, size=reps) / draws
    b = rng.multinomial(draws, mass, size=reps) / draws
    d = np.sqrt(np.sum((np.sqrt(a) - np.sqrt(b)) ** 2, axis=1))
    return float(np.quantile(d, quantile))


def sample_thrun(z_star, params, seed):
    """Readings from the exponential-short baseline mixture."""
    if not isinstance(params, ThrunParams):
        raise TypeError("expected ThrunParams")
    z_star = np.atleast_1d(np.asarray(z_star, dtype=float))
    rng = np.random.default_rng(_seed_sequence(seed))
    m = z_star.size
    cause = rng.choice(4, size=m, p=params.weights / params.weights.sum())
    z = z_star + params.sigma_m * rng.standard_normal(m)
    lam = params.lambda_short
    short = cause == 1
    v = rng.random(m)
    z_short = -np.log1p(v * np.expm1(-lam * z_star)) / lam
    z = np.where(short, z_short, z)
    z = np.where(cause == 2, params.z_max, z)
    z = np.where(cause == 3, rng.uniform(0.0, params.z_max, m), z)
    return Dataset(np.clip(z, 0.0, params.z_max), z_star)
