"""Full-scan likelihoods that account for pose uncertainty.

Beams of one scan are not independent once the pose is only known up to a
local region: a small rotation moves every beam at once, and a beam that
grazes an obstacle corner either hits the obstacle or the wall behind it.
The sample-based model simulates ``L`` noiseless scans from poses drawn in
the region and averages the per-pose scan likelihood, which keeps that
multi-modality. Two baselines are provided for comparison: independent
beams at the point estimate, and a joint Gaussian fitted to the simulated
scans.

Seeds are anything accepted by ``numpy.random.default_rng``. Grid cells of a
probability map use ``SeedSequence(seed, spawn_key=(cell,))``, so cell values
do not depend on evaluation order or thread count.
"""
from __future__ import annotations

import enum
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import linalg
from scipy.special import logsumexp, ndtr

from .beam_model import (MAX_RANGE_EPS, LOG_SQRT_2PI, log_p_hit, log_weighted_components,
                         p_hit, p_occl, p_occl_cdf)
from .geometry import Pose, ScanGeometry, simulate_ideal_scans, wrap_angle
from .metrics import BinnedDistribution

COV_JITTER = 1e-9


class ScanMode(str, enum.Enum):
    STATIC = "static_hit_only"
    DYNAMIC = "dynamic_full_mixture"


class RegionShape(str, enum.Enum):
    GAUSSIAN = "gaussian"
    DISK = "disk"


@dataclass(frozen=True)
class LocalRegion:
    """Pose uncertainty around an estimate.

    ``trans_sigma`` (m) and ``rot_sigma`` (rad) are standard deviations for
    the Gaussian shape, and radius / half-width for the uniform disk shape.
    """

    trans_sigma: float = 0.0
    rot_sigma: float = 0.0
    euclid_weight: float = 1.0
    angular_weight: float = 1.0
    shape: RegionShape = RegionShape.GAUSSIAN

    def __post_init__(self):
        if self.trans_sigma < 0 or self.rot_sigma < 0:
            raise ValueError("region scales must be >= 0")
        if self.euclid_weight < 0 or self.angular_weight < 0:
            raise ValueError("region weights must be >= 0")
        if self.euclid_weight == 0 and self.angular_weight == 0:
            raise ValueError("region weights must not both be zero")
        object.__setattr__(self, "shape", RegionShape(self.shape))

    @property
    def diameter(self):
        """``d_U``: weighted sum of translational and angular diameters."""
        return (self.euclid_weight * 2.0 * self.trans_sigma
                + self.angular_weight * 2.0 * self.rot_sigma)

    @property
    def degenerate(self):
        return self.trans_sigma == 0 and self.rot_sigma == 0


@dataclass(frozen=True)
class ScanModelConfig:
    L: int = 150
    C: float = 20.0
    mode: ScanMode = ScanMode.STATIC

    def __post_init__(self):
        if int(self.L) != self.L or self.L < 1:
            raise ValueError(f"L must be an integer >= 1, got {self.L}")
        if not self.C >= 0:
            raise ValueError(f"C must be >= 0, got {self.C}")
        object.__setattr__(self, "L", int(self.L))
        object.__setattr__(self, "mode", ScanMode(self.mode))


@dataclass(frozen=True)
class Scan:
    z: np.ndarray
    geometry: ScanGeometry

    def __post_init__(self):
        z = np.atleast_1d(np.asarray(self.z, dtype=float))
        if z.shape != (self.geometry.count,):
            raise ValueError(f"scan has {z.size} ranges for {self.geometry.count} beams")
        if not np.all(np.isfinite(z)) or np.any(z < 0):
            raise ValueError("scan ranges must be finite and >= 0")
        z.setflags(write=False)
        object.__setattr__(self, "z", z)

    def check_range(self, z_max):
        if np.any(self.z > z_max):
            raise ValueError(f"scan ranges must lie in [0, {z_max}]")


def sample_region_poses(pose, region, L, rng_seed):
    """Draw ``L`` poses from the region around ``pose``.

    Returns an ``(L, 3)`` array of ``(x, y, heading)`` rows.
    """
    if L < 1:
        raise ValueError(f"L must be >= 1, got {L}")
    rng = np.random.default_rng(rng_seed)
    if region.shape is RegionShape.GAUSSIAN:
        noise = rng.standard_normal((L, 3))
        dx = region.trans_sigma * noise[:, 0]
        dy = region.trans_sigma * noise[:, 1]
        dth = region.rot_sigma * noise[:, 2]
    else:
        u = rng.random((L, 3))
        r = region.trans_sigma * np.sqrt(u[:, 0])
        phi = 2.0 * np.pi * u[:, 1]
        dx, dy = r * np.cos(phi), r * np.sin(phi)
        dth = region.rot_sigma * (2.0 * u[:, 2] - 1.0)
    return np.column_stack([pose.x + dx, pose.y + dy, wrap_angle(pose.heading + dth)])


def inflated_sigma(sigma_m, region, C=20.0):
    """Hit noise widened by ``1 + C * sqrt(d_U)`` to smooth the likelihood."""
    return sigma_m * (1.0 + C * math.sqrt(region.diameter))


def log_mean_exp(values, axis=-1):
    """``log(mean(exp(values)))`` without overflow or underflow."""
    values = np.asarray(values, dtype=float)
    return logsumexp(values, axis=axis) - math.log(values.shape[axis])


def _log_beam_density(z, z_star, params, sigma, mode):
    """Per-beam log density, broadcasting ``z`` against ``z_star``."""
    if mode is ScanMode.STATIC:
        return log_p_hit(z, z_star, sigma)
    comps = log_weighted_components(z, z_star, params.replace(sigma_m=sigma))
    return logsumexp(comps, axis=-1)


def _ideal_scans(segmap, poses, geometry):
    return simulate_ideal_scans(segmap, poses, geometry)


def scan_loglik_independent(scan, pose, segmap, params):
    """Sum of per-beam mixture log-likelihoods at a single pose."""
    scan.check_range(segmap.z_max)
    z_star = _ideal_scans(segmap, [[pose.x, pose.y, pose.heading]], scan.geometry)[0]
    logs = logsumexp(log_weighted_components(scan.z, z_star, params), axis=-1)
    return float(np.sum(logs))


def _per_pose_logliks(scan, poses, segmap, params, region, cfg):
    z_star = _ideal_scans(segmap, poses, scan.geometry)
    sigma = inflated_sigma(params.sigma_m, region, cfg.C)
    return _log_beam_density(scan.z[None, :], z_star, params, sigma, cfg.mode).sum(axis=1)


def scan_loglik_sample_based(scan, pose, segmap, params, region, cfg, rng_seed):
    """Log of the scan likelihood averaged over ``cfg.L`` sampled poses.

    Static mode scores each beam with the widened hit Gaussian only;
    dynamic mode uses the full mixture with the widened hit component.
    Returns ``-inf`` only when every sampled pose gives zero likelihood.
    """
    scan.check_range(segmap.z_max)
    poses = sample_region_poses(pose, region, cfg.L, rng_seed)
    return float(log_mean_exp(_per_pose_logliks(scan, poses, segmap, params, region, cfg)))


@dataclass(frozen=True)
class GaussianScanFit:
    mean: np.ndarray
    cov: np.ndarray

    def logpdf(self, z):
        z = np.asarray(z, dtype=float)
        chol = _cholesky(self.cov)
        r = linalg.solve_triangular(chol, z - self.mean, lower=True)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return float(-0.5 * r @ r - 0.5 * logdet - self.mean.size * LOG_SQRT_2PI)


def _cholesky(cov):
    # jitter is a fallback only, so well-conditioned fits stay exact
    try:
        return linalg.cholesky(cov, lower=True)
    except linalg.LinAlgError:
        pass
    try:
        return linalg.cholesky(cov + COV_JITTER * np.eye(len(cov)), lower=True)
    except linalg.LinAlgError:
        raise linalg.LinAlgError("scan covariance is not positive definite after jitter") from None


def fit_gaussian_scan(segmap, pose, geometry, params, region, L, rng_seed, C=20.0):
    """Joint Gaussian over the beams from ``L`` simulated noiseless scans.

    The sample covariance (maximum likelihood, divisor ``L``) gets the
    squared widened hit noise added to its diagonal.
    """
    if L < 2:
        raise ValueError(f"the Gaussian baseline needs L >= 2, got {L}")
    poses = sample_region_poses(pose, region, L, rng_seed)
    scans = _ideal_scans(segmap, poses, geometry)
    mean = scans.mean(axis=0)
    centered = scans - mean
    cov = centered.T @ centered / L
    sigma = inflated_sigma(params.sigma_m, region, C)
    cov[np.diag_indices_from(cov)] += sigma * sigma
    return GaussianScanFit(mean, cov)


def scan_loglik_gaussian_baseline(scan, pose, segmap, params, region, L, rng_seed, C=20.0):
    scan.check_range(segmap.z_max)
    fit = fit_gaussian_scan(segmap, pose, scan.geometry, params, region, L, rng_seed, C)
    return fit.logpdf(scan.z)


@dataclass(frozen=True)
class BeamMarginal:
    """Per-beam marginal on a grid: continuous density plus max-range atom mass."""

    z: np.ndarray
    density: np.ndarray
    atom: float = 0.0

    def mass(self):
        return float(np.trapezoid(self.density, self.z)) + self.atom

    def local_maxima(self):
        """Grid points of strict local maxima (plateaus count once)."""
        d = self.density
        idx = []
        i, n = 1, d.size
        while i < n - 1:
            j = i
            while j + 1 < n and d[j + 1] == d[i]:
                j += 1
            if d[i] > d[i - 1] and j + 1 < n and d[i] > d[j + 1]:
                idx.append((i + j) // 2)
            i = j + 1
        return self.z[np.array(idx, dtype=int)]

    def to_csv(self, path):
        lines = ["z,density"] + [f"{a!r},{b!r}" for a, b in
                                 zip(self.z.tolist(), self.density.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")


def _beam_expected_ranges(beam_index, pose, segmap, geometry, region, L, rng_seed):
    poses = sample_region_poses(pose, region, L, rng_seed)
    return _ideal_scans(segmap, poses, geometry)[:, beam_index]


def beam_marginal(beam_index, pose, segmap, params, region, cfg, grid, rng_seed, geometry,
                  model="sample"):
    """Marginal density of one beam under a full-scan model.

    ``model="sample"`` averages the per-pose beam density over the sampled
    poses; ``model="gaussian"`` returns the matching diagonal entry of the
    fitted joint Gaussian. In dynamic mode the max-range atom is reported
    separately as ``atom``.
    """
    grid = np.asarray(grid, dtype=float)
    if grid.size == 0:
        raise ValueError("grid must be nonempty")
    if not 0 <= beam_index < geometry.count:
        raise IndexError(f"beam {beam_index} out of range for {geometry.count} beams")
    sigma = inflated_sigma(params.sigma_m, region, cfg.C)
    if model == "gaussian":
        fit = fit_gaussian_scan(segmap, pose, geometry, params, region, cfg.L, rng_seed, cfg.C)
        sd = math.sqrt(fit.cov[beam_index, beam_index])
        return BeamMarginal(grid, p_hit(grid, fit.mean[beam_index], sd))
    if model != "sample":
        raise ValueError(f"unknown marginal model {model!r}")
    zs = _beam_expected_ranges(beam_index, pose, segmap, geometry, region, cfg.L, rng_seed)
    hit = p_hit(grid[:, None], zs[None, :], sigma).mean(axis=1)
    if cfg.mode is ScanMode.STATIC:
        return BeamMarginal(grid, hit)
    w = params.weights
    occl = p_occl(grid[:, None], zs[None, :], params.p_prime).mean(axis=1)
    rand = np.where((grid >= 0) & (grid <= params.z_max), 1.0 / params.z_max, 0.0)
    return BeamMarginal(grid, w.pi1 * hit + w.pi2 * occl + w.pi3 * rand, atom=w.pi4)


def beam_marginal_binned(beam_index, pose, segmap, params, region, cfg, edges, rng_seed,
                         geometry, model="sample"):
    """Bin masses of a beam marginal, with readings clipped to ``[0, z_max]``.

    Masses come from closed-form CDFs, so no grid quadrature is involved.
    Mass below the first or above the last edge is folded into the end bins.
    """
    edges = np.asarray(edges, dtype=float)
    inner = edges[1:-1]
    sigma = inflated_sigma(params.sigma_m, region, cfg.C)

    def gauss_cdf(mu, sd):
        c = ndtr((inner[:, None] - np.atleast_1d(mu)[None, :]) / sd).mean(axis=1)
        return np.concatenate([[0.0], c, [1.0]])

    if model == "gaussian":
        fit = fit_gaussian_scan(segmap, pose, geometry, params, region, cfg.L, rng_seed, cfg.C)
        cdf = gauss_cdf(fit.mean[beam_index], math.sqrt(fit.cov[beam_index, beam_index]))
    elif model == "sample":
        zs = _beam_expected_ranges(beam_index, pose, segmap, geometry, region, cfg.L, rng_seed)
        cdf = gauss_cdf(zs, sigma)
        if cfg.mode is ScanMode.DYNAMIC:
            w = params.weights
            occl = np.mean([p_occl_cdf(inner, z, params.p_prime) if z > 0
                            else np.ones_like(inner) for z in zs], axis=0)
            rand = np.clip(inner / params.z_max, 0.0, 1.0)
            atom = (inner >= params.z_max - MAX_RANGE_EPS).astype(float)
            mixed = w.pi1 * cdf[1:-1] + w.pi2 * occl + w.pi3 * rand + w.pi4 * atom
            cdf = np.concatenate([[0.0], mixed, [1.0]])
    else:
        raise ValueError(f"unknown marginal model {model!r}")
    mass = np.clip(np.diff(cdf), 0.0, None)
    return BinnedDistribution(edges, mass / mass.sum())


def cell_seed(seed, index):
    """Child seed of grid cell ``index``, independent of evaluation order."""
    root = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    return np.random.SeedSequence(root.entropy, spawn_key=root.spawn_key + (index,))


@dataclass(frozen=True)
class GridSpec:
    x0: float
    x1: float
    nx: int
    y0: float
    y1: float
    ny: int
    heading: float = 0.0
    headings: tuple = ()

    def __post_init__(self):
        if self.nx < 1 or self.ny < 1:
            raise ValueError("grid needs at least one cell per axis")

    @property
    def xs(self):
        return np.linspace(self.x0, self.x1, self.nx)

    @property
    def ys(self):
        return np.linspace(self.y0, self.y1, self.ny)


@dataclass(frozen=True)
class ProbabilityMap:
    """Row-major grid: ``loglik[j, i]`` belongs to ``(xs[i], ys[j])``."""

    xs: np.ndarray
    ys: np.ndarray
    loglik: np.ndarray

    @property
    def likelihood(self):
        return np.exp(self.loglik)

    def to_csv(self, path, log=False):
        vals = self.loglik if log else self.likelihood
        lines = ["y\\x," + ",".join(repr(float(x)) for x in self.xs)]
        for y, row in zip(self.ys.tolist(), vals.tolist()):
            lines.append(",".join([repr(y)] + [repr(v) for v in row]))
        Path(path).write_text("\n".join(lines) + "\n")


def probability_map(scan, segmap, params, region, cfg, grid_spec, rng_seed, n_jobs=1):
    """Sample-based scan log-likelihood at every grid pose.

    With ``grid_spec.headings`` set, the likelihood is averaged over those
    headings instead of using the single ``grid_spec.heading``.
    """
    scan.check_range(segmap.z_max)
    xs, ys = grid_spec.xs, grid_spec.ys
    headings = tuple(grid_spec.headings) or (grid_spec.heading,)
    def cell(idx):
        j, i = divmod(idx, len(xs))
        seeds = cell_seed(rng_seed, idx).spawn(len(headings))
        vals = [scan_loglik_sample_based(scan, Pose(xs[i], ys[j], h), segmap, params,
                                         region, cfg, s)
                for h, s in zip(headings, seeds)]
        return float(log_mean_exp(vals))

    cells = range(len(xs) * len(ys))
    if n_jobs > 1:
        with ThreadPoolExecutor(n_jobs) as pool:
            vals = list(pool.map(cell, cells))
    else:
        vals = [cell(k) for k in cells]
    return ProbabilityMap(xs, ys, np.array(vals).reshape(len(ys), len(xs)))
