import math
import random

import numpy as np
import pytest

from auvsitl import hydro, rng
from auvsitl.percept import (
    CameraIntrinsics,
    CameraPose,
    Detection,
    LatencyQueue,
    PerceptConfig,
    SceneObject,
    frame_instants,
    frame_tick,
    project,
    render_detections,
    unproject,
)

CAM = CameraIntrinsics()


def pose_at(position=(0.0, 0.0, 1.0), attitude=(0.0, 0.0, 0.0)):
    return CameraPose(np.array(position, dtype=float), hydro.rotation_matrix(*attitude))


def test_intrinsics():
    assert CAM.fx == pytest.approx(1004.5988, abs=1e-3)
    assert CAM.fy == CAM.fx
    assert (CAM.cx, CAM.cy) == (640.0, 360.0)
    with pytest.raises(ValueError):
        CameraIntrinsics(hfov_deg=0.0)


def test_project_on_axis_and_behind():
    pose = pose_at()
    assert project((5.0, 0.0, 1.0), pose, CAM) == pytest.approx((640.0, 360.0))
    assert project((-5.0, 0.0, 1.0), pose, CAM) is None
    assert project((0.05, 0.0, 1.0), pose, CAM) is None


def test_project_axes_follow_body_frame():
    pose = pose_at()
    u, v = project((5.0, 1.0, 1.5), pose, CAM)
    # right of the axis is larger u, deeper is larger v
    assert u > 640.0 and v > 360.0


def test_unproject_recovers_point():
    rnd = random.Random(1)
    for _ in range(200):
        pose = pose_at(
            (rnd.uniform(-5, 5), rnd.uniform(-5, 5), rnd.uniform(0, 3)),
            (rnd.uniform(-0.3, 0.3), rnd.uniform(-0.3, 0.3), rnd.uniform(-math.pi, math.pi)),
        )
        depth = rnd.uniform(0.5, 9.0)
        u0, v0 = rnd.uniform(0, CAM.width), rnd.uniform(0, CAM.height)
        point = unproject(u0, v0, depth, pose, CAM)
        u, v = project(point, pose, CAM)
        assert np.allclose(unproject(u, v, depth, pose, CAM), point, atol=1e-9)


def test_gate_ahead_is_detected():
    gate = SceneObject.gate((3.0, 0.0, 1.0))
    dets = render_detections([gate], pose_at(), 1.0, rng.stream(0, "percept", 30))
    assert len(dets) == 1
    det = dets[0]
    assert det.label == "gate"
    assert det.t_capture == 1.0
    assert 0.95 - 0.06 - 0.05 <= det.score <= 0.95 - 0.06 + 0.05
    assert det.center == pytest.approx((640.0, 360.0))
    # 1.5 m wide at 3 m
    assert det.width == pytest.approx(1.5 * CAM.fx / 3.0)


def test_object_outside_fov_is_culled():
    bearing = math.radians(62.5)
    gate = SceneObject.gate((5.0 * math.cos(bearing), 5.0 * math.sin(bearing), 1.0))
    assert render_detections([gate], pose_at(), 0.0, random.Random(0)) == []


def test_out_of_range_and_too_close_are_culled():
    far = SceneObject.flare((10.5, 0.0, 1.0))
    near = SceneObject.gate((0.08, 0.0, 1.0))
    assert render_detections([far, near], pose_at(), 0.0, random.Random(0)) == []


def test_same_seed_same_detections():
    scene = [SceneObject.gate((4.0, 0.5, 1.2)), SceneObject.flare((7.0, -1.0, 1.5))]
    a = render_detections(scene, pose_at(), 2.0, rng.stream(3, "percept", 60))
    b = render_detections(scene, pose_at(), 2.0, rng.stream(3, "percept", 60))
    assert a == b
    assert len(a) == 2


def test_boxes_are_valid_over_random_poses():
    rnd = random.Random(7)
    scene = [SceneObject.gate((6.0, 1.0, 1.5)), SceneObject.flare((12.0, 1.0, 2.0))]
    emitted = 0
    for i in range(500):
        pose = pose_at(
            (rnd.uniform(-2, 14), rnd.uniform(-4, 4), rnd.uniform(0.2, 3.0)),
            (rnd.uniform(-0.4, 0.4), rnd.uniform(-0.4, 0.4), rnd.uniform(-math.pi, math.pi)),
        )
        for det in render_detections(scene, pose, i / 30, random.Random(i)):
            emitted += 1
            xmin, ymin, xmax, ymax = det.box
            assert 0 <= xmin < xmax <= CAM.width
            assert 0 <= ymin < ymax <= CAM.height
            assert 0.0 <= det.score <= 1.0
    assert emitted > 0


def test_score_is_monotone_in_distance():
    config = PerceptConfig(noise=0.0)
    bearing = 0.04
    scores = []
    for distance in (1.0, 2.0, 4.0, 6.0, 8.0, 9.5):
        gate = SceneObject.gate((distance * math.cos(bearing), distance * math.sin(bearing), 1.0))
        (det,) = render_detections([gate], pose_at(), 0.0, random.Random(0), config)
        scores.append(det.score)
    assert scores == sorted(scores, reverse=True)
    # the 0.75 threshold trips between 8 and 10 m near the axis
    assert scores[4] > 0.75
    assert scores[5] < 0.76


def test_false_positive_injection():
    config = PerceptConfig(false_positive_rate=1.0)
    dets = render_detections([], pose_at(), 0.0, random.Random(4), config)
    assert len(dets) == 1
    xmin, ymin, xmax, ymax = dets[0].box
    assert 0 <= xmin < xmax <= CAM.width
    assert 0 <= ymin < ymax <= CAM.height


def test_latency_queue():
    queue = LatencyQueue(0.5)
    det = render_detections([SceneObject.gate((3.0, 0.0, 1.0))], pose_at(), 1.0, random.Random(0))
    queue.push(1.0, det)
    queue.push(1.0 + 1 / 30, [])
    assert queue.deliver(1.499) == []
    assert queue.deliver(1.5) == det
    assert queue.deliver(1.6) == []
    assert not queue.entries


def test_frame_cadence():
    instants = frame_instants(1.0, 30.0)
    assert len(instants) == 31
    assert instants[1] == 1 / 30
    assert instants[-1] == pytest.approx(1.0)
    assert [frame_tick(k, 30.0, 100.0) for k in range(4)] == [0, 3, 7, 10]
    # capture ticks stay within half a tick of k / 30
    for k in range(300):
        assert abs(frame_tick(k, 30.0, 100.0) / 100 - k / 30) <= 0.005 + 1e-12


def test_detections_arrive_half_a_second_after_capture():
    queue = LatencyQueue(PerceptConfig().latency)
    frame_index = 0
    next_frame = frame_tick(0, CAM.fps, 100.0)
    delays = []
    for k in range(1001):
        now = k / 100
        while k == next_frame:
            t_capture = frame_index / CAM.fps
            queue.push(t_capture, [Detection("gate", (0.0, 0.0, 10.0, 10.0), 0.9, t_capture)])
            frame_index += 1
            next_frame = frame_tick(frame_index, CAM.fps, 100.0)
        delays += [now - det.t_capture for det in queue.deliver(now)]
    assert len(delays) == frame_index - 15
    assert all(0.5 - 1e-9 <= d <= 0.5 + 1 / 30 for d in delays)
