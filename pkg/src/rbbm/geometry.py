"""Line-segment maps and ray casting.

Everything here is a pure function of immutable inputs, so maps and poses
can be shared freely between threads.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

# ray parameters below this are treated as the sensor origin itself
MIN_HIT_DISTANCE = 1e-9


def wrap_angle(theta):
    """Wrap angles to [-pi, pi)."""
    return (np.asarray(theta, dtype=float) + np.pi) % (2.0 * np.pi) - np.pi


@dataclass(frozen=True)
class SegmentMap:
    """2D world made of line segments ``(x1, y1, x2, y2)`` in meters."""

    segments: np.ndarray
    z_max: float

    def __post_init__(self):
        seg = np.asarray(self.segments, dtype=float).reshape(-1, 4)
        if not self.z_max > 0:
            raise ValueError(f"z_max must be > 0, got {self.z_max}")
        lengths = np.hypot(seg[:, 2] - seg[:, 0], seg[:, 3] - seg[:, 1])
        if np.any(lengths == 0):
            bad = int(np.flatnonzero(lengths == 0)[0])
            raise ValueError(f"segment {bad} has zero length")
        seg.setflags(write=False)
        object.__setattr__(self, "segments", seg)
        object.__setattr__(self, "z_max", float(self.z_max))

    def __len__(self):
        return len(self.segments)

    def with_segments(self, extra):
        """Return a new map with ``extra`` segments appended."""
        extra = np.asarray(extra, dtype=float).reshape(-1, 4)
        return SegmentMap(np.vstack([self.segments, extra]), self.z_max)

    def to_json(self):
        return {"z_max": self.z_max, "segments": self.segments.tolist()}

    @classmethod
    def from_json(cls, obj):
        try:
            return cls(obj["segments"], obj["z_max"])
        except KeyError as err:
            raise ValueError(f"map file is missing key {err}") from None


def load_map(path):
    with open(path) as fh:
        return SegmentMap.from_json(json.load(fh))


def save_map(segmap, path):
    Path(path).write_text(json.dumps(segmap.to_json(), indent=2) + "\n")


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "heading", float(wrap_angle(self.heading)))


@dataclass(frozen=True)
class ScanGeometry:
    """Beam angles relative to the sensor heading, strictly increasing."""

    angles: np.ndarray = field(default_factory=lambda: np.zeros(1))

    def __post_init__(self):
        ang = np.atleast_1d(np.asarray(self.angles, dtype=float))
        if ang.ndim != 1 or ang.size < 1:
            raise ValueError("a scan needs at least one beam")
        if np.any(np.diff(ang) <= 0):
            raise ValueError("beam angles must be strictly increasing")
        ang.setflags(write=False)
        object.__setattr__(self, "angles", ang)

    @property
    def count(self):
        return self.angles.size

    @classmethod
    def fan(cls, count, fov):
        """``count`` beams evenly spread over ``[-fov/2, fov/2]``."""
        if count == 1:
            return cls(np.zeros(1))
        return cls(np.linspace(-fov / 2.0, fov / 2.0, count))


def cast_rays(segmap, x, y, theta):
    """Vectorised ray casting.

    ``x``, ``y`` and ``theta`` (absolute ray directions) broadcast against
    each other; the result has their broadcast shape.
    """
    x, y, theta = np.broadcast_arrays(
        np.asarray(x, dtype=float), np.asarray(y, dtype=float),
        np.asarray(theta, dtype=float))
    shape = x.shape
    out = np.full(shape, segmap.z_max)
    if len(segmap) == 0 or out.size == 0:
        return out

    ox, oy = x.reshape(-1, 1), y.reshape(-1, 1)
    dx, dy = np.cos(theta).reshape(-1, 1), np.sin(theta).reshape(-1, 1)
    seg = segmap.segments
    ax, ay = seg[:, 0], seg[:, 1]
    ex, ey = seg[:, 2] - ax, seg[:, 3] - ay

    # solve o + t*d = a + s*e for (t, s)
    denom = dx * ey - dy * ex
    wx, wy = ax - ox, ay - oy
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        t = (wx * ey - wy * ex) / denom
        s = (wx * dy - wy * dx) / denom
    hit = (denom != 0) & (t >= MIN_HIT_DISTANCE) & (s >= 0.0) & (s <= 1.0)
    t = np.where(hit, t, np.inf)
    nearest = t.min(axis=1)
    return np.minimum(nearest, segmap.z_max).reshape(shape)


def ray_cast(segmap, pose, angle):
    """Expected range along ``pose.heading + angle``, clamped to ``z_max``."""
    return float(cast_rays(segmap, pose.x, pose.y, pose.heading + angle))


def simulate_ideal_scan(segmap, pose, geom):
    """Noise-free ranges for every beam of ``geom`` seen from ``pose``."""
    return cast_rays(segmap, pose.x, pose.y, pose.heading + geom.angles)


def simulate_ideal_scans(segmap, poses, geom):
    """Noise-free scans for an array of poses ``(L, 3)``; returns ``(L, B)``."""
    poses = np.asarray(poses, dtype=float).reshape(-1, 3)
    theta = poses[:, 2:3] + geom.angles[None, :]
    return cast_rays(segmap, poses[:, 0:1], poses[:, 1:2], theta)


def rectangle(x0, y0, x1, y1):
    """The four wall segments of an axis-aligned rectangle."""
    return np.array([
        [x0, y0, x1, y0],
        [x1, y0, x1, y1],
        [x1, y1, x0, y1],
        [x0, y1, x0, y0],
    ], dtype=float)


def heading_to(pose, point):
    """Angle of ``point`` as seen from ``pose``, relative to its heading."""
    return float(wrap_angle(math.atan2(point[1] - pose.y, point[0] - pose.x)
                            - pose.heading))
