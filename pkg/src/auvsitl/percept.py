"""
Synthetic object detector.

Stands in for the on-board CNN: a forward-looking pinhole camera projects the
known scene objects (gates and flares) into labelled pixel bounding boxes with
a confidence score, and a latency queue delays them by the processing time.
"""

import math
from collections import deque
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from auvsitl import hydro

LABELS = ("gate", "flare")


@dataclass(frozen=True)
class CameraIntrinsics:
    """
    Pinhole intrinsics from resolution and horizontal field of view.
    Pixels are square (fy == fx); the principal point is the frame centre.
    """

    width: int = 1280
    height: int = 720
    hfov_deg: float = 65.0
    fps: float = 30.0

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError("camera resolution must be positive")
        if not 0 < self.hfov_deg < 180:
            raise ValueError(f"hfov_deg must be in (0, 180), got {self.hfov_deg}")
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")

    @property
    def fx(self):
        return (self.width / 2.0) / math.tan(math.radians(self.hfov_deg) / 2.0)

    @property
    def fy(self):
        return self.fx

    @property
    def cx(self):
        return self.width / 2.0

    @property
    def cy(self):
        return self.height / 2.0


@dataclass(frozen=True)
class PerceptConfig:
    """
    Camera, latency and confidence-model settings. The score constants are
    chosen so a 0.75 threshold trips at roughly 8-9 m on the optical axis.
    """

    camera: CameraIntrinsics = CameraIntrinsics()
    latency: float = 0.5
    score_base: float = 0.95
    score_per_m: float = 0.02
    score_per_rad: float = 0.3
    noise: float = 0.05
    min_depth: float = 0.1
    max_range: float = 10.0
    false_positive_rate: float = 0.0

    def __post_init__(self):
        if self.latency < 0:
            raise ValueError(f"latency must be >= 0, got {self.latency}")
        if self.noise < 0:
            raise ValueError(f"noise must be >= 0, got {self.noise}")
        if not 0.0 <= self.false_positive_rate <= 1.0:
            raise ValueError("false_positive_rate must be in [0, 1]")
        if not 0 < self.min_depth < self.max_range:
            raise ValueError("need 0 < min_depth < max_range")


@dataclass(frozen=True)
class SceneObject:
    """
    A gate (planar rectangle facing along yaw) or a flare (vertical cylinder).

    Attributes:
        label (str): "gate" or "flare".
        position (tuple): Centre in world NED, m.
        yaw (float): Heading of the gate normal, rad.
        width (float): Gate width, m (flares use 2 * radius).
        height (float): Object height, m.
    """

    label: str
    position: Tuple[float, float, float]
    yaw: float = 0.0
    width: float = 1.5
    height: float = 1.0

    def __post_init__(self):
        if self.label not in LABELS:
            raise ValueError(f"unknown object label '{self.label}'")
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"{self.label}: extents must be positive")

    @classmethod
    def gate(cls, position, yaw=0.0, width=1.5, height=1.0):
        return cls("gate", tuple(position), yaw, width, height)

    @classmethod
    def flare(cls, position, radius=0.08, height=1.2):
        return cls("flare", tuple(position), 0.0, 2.0 * radius, height)

    @property
    def centre(self):
        return np.asarray(self.position, dtype=float)

    @property
    def lateral(self):
        """Unit vector across the gate, in the horizontal plane."""
        return np.array([-math.sin(self.yaw), math.cos(self.yaw), 0.0])

    def extent_points(self):
        c = self.centre
        up = np.array([0.0, 0.0, self.height / 2.0])
        if self.label == "gate":
            half = self.lateral * (self.width / 2.0)
            return [c + half + up, c + half - up, c - half + up, c - half - up]
        r = self.width / 2.0
        points = []
        for k in range(8):
            a = k * math.pi / 4.0
            ring = np.array([r * math.cos(a), r * math.sin(a), 0.0])
            points.append(c + ring + up)
            points.append(c + ring - up)
        return points


class CameraPose(NamedTuple):
    """Camera position (world) and body-to-world rotation."""

    position: np.ndarray
    rotation: np.ndarray

    @classmethod
    def from_vehicle(cls, vehicle):
        # camera sits at the body origin looking along +x body
        return cls(np.asarray(vehicle.position, dtype=float), hydro.rotation_matrix(*vehicle.attitude))

    def to_camera(self, point):
        return self.rotation.T @ (np.asarray(point, dtype=float) - self.position)


@dataclass(frozen=True)
class Detection:
    """
    Labelled pixel bounding box.

    Attributes:
        label (str): Object class.
        box (tuple): (xmin, ymin, xmax, ymax) in pixels.
        score (float): Confidence in [0, 1].
        t_capture (float): Frame capture time, s.
    """

    label: str
    box: Tuple[float, float, float, float]
    score: float
    t_capture: float

    @property
    def center(self):
        xmin, ymin, xmax, ymax = self.box
        return (xmin + xmax) / 2.0, (ymin + ymax) / 2.0

    @property
    def width(self):
        return self.box[2] - self.box[0]

    @property
    def height(self):
        return self.box[3] - self.box[1]

    @property
    def area(self):
        return self.width * self.height


def project(point, pose, intrinsics, min_depth=0.1):
    """
    Project a world point to pixel coordinates.

    Returns:
        tuple: (u, v), or None when the point is not at least min_depth in
        front of the camera. u grows with body y (right), v with body z (down).
    """
    x, y, z = pose.to_camera(point)
    if x <= min_depth:
        return None
    return intrinsics.cx + intrinsics.fx * (y / x), intrinsics.cy + intrinsics.fy * (z / x)


def unproject(u, v, depth, pose, intrinsics):
    """World point at a given camera-forward depth behind pixel (u, v)."""
    y = (u - intrinsics.cx) * depth / intrinsics.fx
    z = (v - intrinsics.cy) * depth / intrinsics.fy
    return pose.position + pose.rotation @ np.array([depth, y, z])


def _score(config, distance, off_axis):
    return config.score_base - config.score_per_m * distance - config.score_per_rad * abs(off_axis)


def render_detections(scene, pose, t, rng, config=None):
    """
    Detections for one camera frame.

    An object is reported when its centre is between min_depth and max_range
    in front of the camera and projects inside the frame. The box is the
    pixel bounding box of the projected extent, clipped to the frame.

    Args:
        scene (list): SceneObject entries.
        pose (CameraPose): Camera pose at capture.
        t (float): Capture time, s.
        rng (random.Random): Per-frame random stream.
        config (PerceptConfig): Camera and score model.

    Returns:
        list: Detection entries in scene order.
    """
    config = config or PerceptConfig()
    cam = config.camera
    out = []
    for obj in scene:
        noise = rng.uniform(-config.noise, config.noise)
        x, y, z = pose.to_camera(obj.centre)
        if not config.min_depth < x <= config.max_range:
            continue
        u_c = cam.cx + cam.fx * (y / x)
        v_c = cam.cy + cam.fy * (z / x)
        if not (0.0 <= u_c < cam.width and 0.0 <= v_c < cam.height):
            continue
        pixels = [project(p, pose, cam, config.min_depth) for p in obj.extent_points()]
        if any(p is None for p in pixels):
            continue
        us = [p[0] for p in pixels]
        vs = [p[1] for p in pixels]
        xmin = min(max(min(us), 0.0), float(cam.width))
        xmax = min(max(max(us), 0.0), float(cam.width))
        ymin = min(max(min(vs), 0.0), float(cam.height))
        ymax = min(max(max(vs), 0.0), float(cam.height))
        if not (xmin < xmax and ymin < ymax):
            continue
        distance = math.sqrt(x * x + y * y + z * z)
        off_axis = math.atan2(math.hypot(y, z), x)
        score = min(1.0, max(0.0, _score(config, distance, off_axis) + noise))
        out.append(Detection(obj.label, (xmin, ymin, xmax, ymax), score, t))

    if config.false_positive_rate > 0 and rng.random() < config.false_positive_rate:
        w = rng.uniform(20.0, 200.0)
        h = rng.uniform(20.0, 200.0)
        xmin = rng.uniform(0.0, cam.width - w)
        ymin = rng.uniform(0.0, cam.height - h)
        out.append(
            Detection(rng.choice(LABELS), (xmin, ymin, xmin + w, ymin + h), rng.uniform(0.5, 1.0), t)
        )
    return out


def frame_instants(duration, fps):
    """Capture instants k / fps covering [0, duration]."""
    return [k / fps for k in range(int(math.floor(duration * fps + 1e-9)) + 1)]


def frame_tick(k, fps, tick_hz):
    """Physics tick nearest to frame instant k / fps."""
    return int(math.floor(k * tick_hz / fps + 0.5))


class LatencyQueue:
    """
    FIFO of detection batches released latency seconds after capture.

    Attributes:
        latency (float): Processing delay, s.
        entries (deque): (t_deliver, detections) pairs.
    """

    def __init__(self, latency=0.5):
        self.latency = latency
        self.entries = deque()

    def push(self, t_capture, detections):
        self.entries.append((t_capture + self.latency, list(detections)))

    def deliver(self, now):
        """Pop every batch due by now, oldest first, flattened."""
        out = []
        while self.entries and self.entries[0][0] <= now + 1e-9:
            out.extend(self.entries.popleft()[1])
        return out
