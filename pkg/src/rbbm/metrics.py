"""Histograms and the two model-fit distances (discrete KL and Hellinger)."""
from __future__ import annotations

import warnings
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from scipy import integrate

KL_FLOOR = 1e-12


class ZeroModelMassWarning(UserWarning):
    """A model bin with zero mass was floored while computing a KL divergence."""


@dataclass(frozen=True)
class BinnedDistribution:
    edges: np.ndarray
    mass: np.ndarray

    def __post_init__(self):
        edges = np.asarray(self.edges, dtype=float)
        mass = np.asarray(self.mass, dtype=float)
        if edges.ndim != 1 or edges.size < 2 or np.any(np.diff(edges) <= 0):
            raise ValueError("edges must be strictly increasing with at least 2 entries")
        if mass.shape != (edges.size - 1,):
            raise ValueError(f"need {edges.size - 1} bin masses, got {mass.shape}")
        if np.any(mass < 0):
            raise ValueError("bin masses must be >= 0")
        if abs(mass.sum() - 1.0) > 1e-9:
            raise ValueError(f"bin masses must sum to 1, got {mass.sum()!r}")
        object.__setattr__(self, "edges", edges)
        object.__setattr__(self, "mass", mass)

    @property
    def centers(self):
        return 0.5 * (self.edges[1:] + self.edges[:-1])

    @property
    def widths(self):
        return np.diff(self.edges)

    def to_csv(self, path):
        lines = ["# edges: " + ",".join(repr(float(e)) for e in self.edges),
                 "bin_center,mass"]
        lines += [f"{c!r},{m!r}" for c, m in zip(self.centers.tolist(), self.mass.tolist())]
        Path(path).write_text("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        text = Path(path).read_text().splitlines()
        if not text or not text[0].startswith("# edges:"):
            raise ValueError(f"{path}: missing '# edges:' header")
        edges = [float(v) for v in text[0].split(":", 1)[1].split(",")]
        mass = [float(line.split(",")[1]) for line in text[2:] if line.strip()]
        return cls(np.array(edges), np.array(mass))


def default_edges(z_max, bins=100):
    """Equal-width bins over ``[0, z_max]``."""
    return np.linspace(0.0, z_max, bins + 1)


def build_histogram(samples, edges):
    """Normalised histogram; samples are clipped into the edge range first."""
    samples = np.asarray(samples, dtype=float).ravel()
    if samples.size == 0:
        raise ValueError("cannot build a histogram from an empty sample")
    edges = np.asarray(edges, dtype=float)
    samples = np.clip(samples, edges[0], edges[-1])
    counts, _ = np.histogram(samples, bins=edges)
    return BinnedDistribution(edges, counts / counts.sum())


def integrate_bins(density_fn, edges, breakpoints=()):
    """Per-bin integrals of ``density_fn`` by adaptive quadrature.

    ``breakpoints`` mark discontinuities; they are passed to the integrator
    for every bin that contains one.
    """
    edges = np.asarray(edges, dtype=float)
    bps = np.sort(np.asarray(breakpoints, dtype=float).ravel())
    out = np.empty(edges.size - 1)
    f = lambda x: float(density_fn(x))  # noqa: E731
    for i, (a, b) in enumerate(zip(edges[:-1], edges[1:])):
        inner = bps[(bps > a) & (bps < b)]
        val, _ = integrate.quad(f, a, b, points=inner if inner.size else None,
                                limit=200, epsabs=1e-13, epsrel=1e-11)
        out[i] = val
    return out


def discretize_density(density_fn, edges, atom_at=None, breakpoints=()):
    """Bin masses of a continuous density plus an optional point mass.

    ``atom_at`` is ``(location, mass)``; the mass goes to the bin holding the
    location (the last bin is closed on the right). The result is
    renormalised to one.
    """
    raw = np.clip(integrate_bins(density_fn, edges, breakpoints), 0.0, None)
    if atom_at is not None:
        loc, m = atom_at
        raw[_bin_index(edges, loc)] += m
    total = raw.sum()
    if not total > 0:
        raise ValueError("density has no mass on the given bins")
    return BinnedDistribution(edges, raw / total)


def _bin_index(edges, x):
    edges = np.asarray(edges, dtype=float)
    if not edges[0] <= x <= edges[-1]:
        raise ValueError(f"{x} lies outside the bin range")
    return int(min(np.searchsorted(edges, x, side="right") - 1, edges.size - 2))


def _check_same_bins(h, p):
    if h.edges.shape != p.edges.shape or not np.array_equal(h.edges, p.edges):
        raise ValueError("distributions are defined on different bins")


def kl_divergence(h, p):
    """Discrete KL divergence ``sum h log(h / p)`` in nats.

    Empty ``h`` bins contribute nothing. Where ``h > 0`` but ``p == 0`` the
    model mass is floored at 1e-12 and a :class:`ZeroModelMassWarning` is
    issued.
    """
    _check_same_bins(h, p)
    hm, pm = h.mass, p.mass
    use = hm > 0
    floored = use & (pm < KL_FLOOR)
    if np.any(floored):
        warnings.warn(f"{int(floored.sum())} model bin(s) floored at {KL_FLOOR}",
                      ZeroModelMassWarning, stacklevel=2)
    q = np.maximum(pm[use], KL_FLOOR)
    return float(np.sum(hm[use] * np.log(hm[use] / q)))


def hellinger_distance(h, p):
    """``sqrt(sum (sqrt h - sqrt p)^2)``; ranges over ``[0, sqrt 2]``."""
    _check_same_bins(h, p)
    return float(np.sqrt(np.sum((np.sqrt(h.mass) - np.sqrt(p.mass)) ** 2)))
