"""Ready-made worlds for the scan-model experiments."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .geometry import Pose, ScanGeometry, SegmentMap, heading_to, rectangle
from .scan_model import LocalRegion


@dataclass(frozen=True)
class Scenario:
    segmap: SegmentMap
    pose: Pose
    geometry: ScanGeometry
    grazing_beam: int
    smooth_beam: int


def room_with_box(room=3.0, box=(1.25, 1.25, 1.75, 1.75), pose=Pose(0.3, 1.0, 0.0),
                  fan_beams=9, fov=math.radians(120.0), z_max=5.0):
    """Square room with a box in the middle, seen from near one wall.

    The grazing beam points at the box corner ``(box[2], box[1])``: small
    rotations make it hit either the box or the far wall. The smooth beam
    is the fan beam closest to straight ahead that clears the box.
    """
    segmap = SegmentMap(np.vstack([rectangle(0.0, 0.0, room, room), rectangle(*box)]), z_max)
    graze = heading_to(pose, (box[2], box[1]))
    fan = ScanGeometry.fan(fan_beams, fov).angles
    fan = fan[np.abs(fan - graze) > 1e-6]
    angles = np.sort(np.append(fan, graze))
    grazing = int(np.flatnonzero(angles == graze)[0])
    lo = math.atan2(box[1] - pose.y, box[0] - pose.x) - pose.heading
    clear = [i for i, a in enumerate(angles) if a < graze - 0.2 or a > lo + 0.6]
    smooth = min(clear, key=lambda i: abs(angles[i]))
    return Scenario(segmap, pose, ScanGeometry(angles), grazing, smooth)


CORNER_REGION = LocalRegion(trans_sigma=0.01, rot_sigma=math.radians(5.0))
