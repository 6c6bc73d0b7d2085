"""
Closed-loop scheduler.

One run advances every component on a fixed 0.01 s grid, in this order per
tick: hydro step, flight controller (inbox, control, telemetry), camera
capture and detection delivery, trace sample, companion (heartbeat, 10 Hz
guidance), link flush in both directions. Integer tick counts drive every rate so runs are
bit-for-bit reproducible for a given scenario and seed.
"""

import csv
import io
import logging
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import List, NamedTuple, Optional

import numpy as np

from auvsitl import DT, fcu, guidance, hydro, mavproto, percept, rng, tlog
from auvsitl.link import DuplexLink

COMPANION_SYS_ID = 1
COMPANION_COMP_ID = 191
TICKS_PER_SECOND = int(round(1.0 / DT))
TRACE_EVERY = 10

CSV_HEADER = (
    ["t", "x", "y", "depth", "roll", "pitch", "yaw"]
    + [f"pwm{i}" for i in range(1, 7)]
    + ["phase", "det_label", "det_score", "dx", "dy"]
)


class SimulationDiverged(RuntimeError):
    """The vehicle state became non-finite or left the attitude envelope."""

    def __init__(self, t, reason):
        super().__init__(f"simulation diverged at t={t:.2f}s: {reason}")
        self.t = t


class TraceRow(NamedTuple):
    """
    One 0.1 s sample, taken once the controller and camera have run for the
    tick. phase and the detection columns are the mission state the thruster
    outputs were produced under, i.e. before this tick's guidance step.
    """

    t: float
    x: float
    y: float
    depth: float
    roll: float
    pitch: float
    yaw: float
    pwm: tuple
    phase: str
    det_label: str = ""
    det_score: Optional[float] = None
    dx: Optional[float] = None
    dy: Optional[float] = None


@dataclass
class RunReport:
    """
    Outcome of one run.

    Attributes:
        scenario (str): Scenario name.
        seed (int): Seed used.
        gate_passed (bool): The CoM crossed a gate plane inside its rectangle.
        t_first_gate_detect (float): First confident gate detection seen by guidance.
        t_aligned (float): First Exact-front classification of the gate.
        t_gate_passed (float): Gate crossing time.
        min_flare_distance (float): Closest approach to a flare axis, m.
        final_phase (str): Mission phase at the end of the run.
        disarm_reason (str): Why the controller last disarmed, if it did.
        sim_time (float): Simulated seconds.
        frames_delivered (int): Frames that crossed the link.
        frames_corrupted (int): Frames that had a bit flipped in transit.
        frames_rejected (int): Decoder diagnostics on either side.
        wall_time (float): Host seconds; excluded from comparisons.
    """

    scenario: str
    seed: int
    gate_passed: bool = False
    t_first_gate_detect: Optional[float] = None
    t_aligned: Optional[float] = None
    t_gate_passed: Optional[float] = None
    min_flare_distance: Optional[float] = None
    final_phase: str = guidance.Phase.IDLE.value
    disarm_reason: Optional[str] = None
    sim_time: float = 0.0
    frames_delivered: int = 0
    frames_corrupted: int = 0
    frames_rejected: int = 0
    wall_time: float = field(default=0.0, compare=False)

    def to_dict(self):
        return asdict(self)


class RunResult(NamedTuple):
    report: RunReport
    tlog: bytes
    csv: str
    trace: List[TraceRow]


def _fmt(value):
    return f"{value:.6f}"


def write_csv(rows):
    """Trace rows as CSV text; floats with six decimals, absent values empty."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_HEADER)
    for row in rows:
        writer.writerow(
            [_fmt(v) for v in (row.t, row.x, row.y, row.depth, row.roll, row.pitch, row.yaw)]
            + [str(int(p)) for p in row.pwm]
            + [
                row.phase,
                row.det_label,
                "" if row.det_score is None else _fmt(row.det_score),
                "" if row.dx is None else _fmt(row.dx),
                "" if row.dy is None else _fmt(row.dy),
            ]
        )
    return buf.getvalue()


def gate_crossing(gate, p_prev, p_now):
    """
    Whether the segment p_prev -> p_now crosses the gate plane inside the
    gate rectangle (either direction).
    """
    normal = np.array([math.cos(gate.yaw), math.sin(gate.yaw), 0.0])
    s_prev = float(normal @ (p_prev - gate.centre))
    s_now = float(normal @ (p_now - gate.centre))
    if s_prev == s_now or (s_prev > 0) == (s_now > 0):
        return False
    point = p_prev + (p_now - p_prev) * (s_prev / (s_prev - s_now))
    offset = point - gate.centre
    return (
        abs(float(gate.lateral @ offset)) <= gate.width / 2.0
        and abs(float(offset[2])) <= gate.height / 2.0
    )


def settling_time(rows, bound, attr="roll"):
    """
    Time of the first trace row after which |attr| stays below bound, or None
    when the last row is still outside it.
    """
    settled = None
    for row in rows:
        if abs(getattr(row, attr)) < bound:
            if settled is None:
                settled = row.t
        else:
            settled = None
    return settled


def flare_distance(flare, position):
    """Distance from a point to the flare's vertical axis segment."""
    c = flare.centre
    half = flare.height / 2.0
    z = min(max(position[2], c[2] - half), c[2] + half)
    return float(np.linalg.norm(position - np.array([c[0], c[1], z])))


class UdpMirror:
    """Copies controller frames to an external ground station over UDP."""

    def __init__(self, host, port):
        # pylint: disable=import-outside-toplevel
        from pymavlink import mavutil

        self.address = f"{host}:{port}"
        self.conn = mavutil.mavlink_connection(f"udpout:{self.address}")
        logging.info("mirroring controller telemetry to udp://%s", self.address)

    def send(self, frame):
        try:
            self.conn.write(frame)
        except OSError as e:
            logging.warning("udp mirror %s: %s", self.address, e)

    def close(self):
        self.conn.close()


class Companion:
    """
    Companion computer: perception buffer, mission state and its view of the
    controller (armed flag from HEARTBEAT/COMMAND_ACK, depth from pressure).
    """

    def __init__(self, config, intrinsics, endpoint):
        self.config = config
        self.intrinsics = intrinsics
        self.endpoint = endpoint
        self.encoder = mavproto.MavEncoder(COMPANION_SYS_ID, COMPANION_COMP_ID)
        self.mission = guidance.MissionState()
        self.armed = False
        self.depth = math.inf
        self.requested_arm = None
        self.detections = []
        self.last_output = None

    def receive(self, messages, now):
        for msg in messages:
            if msg.name == "HEARTBEAT":
                self.endpoint.note_heartbeat_rx(now)
                self.armed = bool(msg["base_mode"] & mavproto.MAV_MODE_FLAG_SAFETY_ARMED)
            elif msg.name == "SCALED_PRESSURE":
                self.depth = fcu.pressure_to_depth(msg["press_abs"])
            elif (
                msg.name == "COMMAND_ACK"
                and msg["command"] == mavproto.MAV_CMD_COMPONENT_ARM_DISARM
                and msg["result"] == mavproto.MAV_RESULT_ACCEPTED
                and self.requested_arm is not None
            ):
                self.armed = self.requested_arm

    def _send(self, msg, now):
        self.endpoint.transmit(self.encoder.encode(msg), now)

    def heartbeat(self, now):
        if not self.endpoint.heartbeat_due(now):
            return
        msg = mavproto.make_message(
            "HEARTBEAT",
            type=mavproto.MAV_TYPE_ONBOARD_CONTROLLER,
            autopilot=mavproto.MAV_AUTOPILOT_INVALID,
            base_mode=0,
            custom_mode=0,
            system_status=mavproto.MAV_STATE_ACTIVE,
            mavlink_version=mavproto.MAVLINK_VERSION,
        )
        self._send(msg, now)
        self.endpoint.note_heartbeat_tx(now)

    def guide(self, now):
        self.mission, out = guidance.mission_step(
            self.mission,
            self.detections,
            self.depth,
            now,
            self.config,
            armed=self.armed,
            intrinsics=self.intrinsics,
        )
        self.detections = []
        for msg in out.commands:
            if msg.name == "COMMAND_LONG":
                self.requested_arm = msg["param1"] >= 0.5
            self._send(msg, now)
        self.last_output = out
        return out


class _Metrics:
    def __init__(self, scenario):
        self.report = RunReport(scenario.name, scenario.seed)
        self.gates = [o for o in scenario.objects if o.label == "gate"]
        self.flares = [o for o in scenario.objects if o.label == "flare"]

    def after_physics(self, p_prev, p_now, now):
        r = self.report
        if not r.gate_passed and any(gate_crossing(g, p_prev, p_now) for g in self.gates):
            r.gate_passed = True
            r.t_gate_passed = now
            logging.info("gate passed at t=%.2fs", now)
        for flare in self.flares:
            d = flare_distance(flare, p_now)
            if r.min_flare_distance is None or d < r.min_flare_distance:
                r.min_flare_distance = d

    def after_guidance(self, out, now):
        r = self.report
        if out.target is None or out.target.label != "gate":
            return
        if r.t_first_gate_detect is None:
            r.t_first_gate_detect = now
        if r.t_aligned is None and out.direction is not None and out.direction.exact_front:
            r.t_aligned = now


# pylint: disable=too-many-locals,too-many-statements
def run(scenario, mirror=None):
    """
    Run a scenario to its duration.

    Args:
        scenario (Scenario): Validated scenario.
        mirror (UdpMirror): Optional telemetry mirror; built from scenario.udp when None.

    Returns:
        RunResult: (report, tlog bytes, csv text, trace rows)

    Raises:
        SimulationDiverged: with the time of failure.
    """
    started = time.perf_counter()
    owns_mirror = mirror is None and scenario.udp is not None
    if owns_mirror:
        mirror = UdpMirror(*scenario.udp)

    link = DuplexLink(scenario.link)
    controller = fcu.FlightController(
        gains=scenario.gains,
        geometry=scenario.geometry,
        params=scenario.vehicle,
        rc_timeout=scenario.rc_timeout,
        endpoint=link.downlink,
    )
    cam = scenario.percept.camera
    companion = Companion(scenario.guidance, cam, link.uplink)
    queue = percept.LatencyQueue(scenario.percept.latency)
    metrics = _Metrics(scenario)

    vehicle = scenario.initial.to_state()
    parsers = {"uplink": None, "downlink": None}
    fcu_inbox, companion_inbox = [], []
    records = []
    trace = []
    frame_index = 0
    next_frame = percept.frame_tick(0, cam.fps, TICKS_PER_SECOND)
    guidance_every = max(1, int(round(TICKS_PER_SECOND / scenario.guidance.rate_hz)))
    n_ticks = int(round(scenario.duration * TICKS_PER_SECOND))
    logging.info(
        "run '%s' seed=%d duration=%.1fs objects=%d",
        scenario.name,
        scenario.seed,
        scenario.duration,
        len(scenario.objects),
    )

    try:
        for k in range(n_ticks + 1):
            now = k / TICKS_PER_SECOND

            if k > 0:
                p_prev = vehicle.position
                try:
                    vehicle = hydro.step(vehicle, controller.state.pwm, scenario.vehicle, scenario.geometry, DT)
                except hydro.NonFiniteState as e:
                    raise SimulationDiverged(now, str(e)) from e
                metrics.after_physics(p_prev, vehicle.position, now)

            for msg in fcu_inbox:
                for reply in controller.handle_message(msg, now):
                    link.downlink.transmit(controller.encode(reply), now)
            fcu_inbox = []
            controller.update(vehicle, now, DT)
            for msg in controller.telemetry_tick(vehicle, now):
                link.downlink.transmit(controller.encode(msg), now)
                if msg.name == "HEARTBEAT":
                    link.downlink.note_heartbeat_tx(now)

            while k == next_frame:
                t_capture = frame_index / cam.fps
                frame_rng = rng.stream(scenario.seed, "percept", frame_index)
                pose = percept.CameraPose.from_vehicle(vehicle)
                queue.push(
                    t_capture,
                    percept.render_detections(scenario.objects, pose, t_capture, frame_rng, scenario.percept),
                )
                frame_index += 1
                next_frame = percept.frame_tick(frame_index, cam.fps, TICKS_PER_SECOND)
            companion.detections.extend(queue.deliver(now))

            if k % TRACE_EVERY == 0:
                trace.append(_trace_row(now, vehicle, controller, companion))

            companion.receive(companion_inbox, now)
            companion_inbox = []
            companion.heartbeat(now)
            if k % guidance_every == 0:
                metrics.after_guidance(companion.guide(now), now)

            for name, endpoint, inbox in (
                ("uplink", link.uplink, fcu_inbox),
                ("downlink", link.downlink, companion_inbox),
            ):
                for delivery in endpoint.poll_deliveries(now):
                    records.append((tlog.seconds_to_us(now), delivery.sent))
                    if mirror is not None and name == "downlink":
                        mirror.send(delivery.frame)
                    result = mavproto.decode_stream(delivery.frame, parsers[name])
                    parsers[name] = result.state
                    inbox.extend(result.messages)
                    metrics.report.frames_rejected += len(result.diagnostics)
                    metrics.report.frames_delivered += 1
    finally:
        if owns_mirror:
            mirror.close()

    report = metrics.report
    report.final_phase = companion.mission.phase.value
    report.disarm_reason = controller.state.disarm_reason or None
    report.sim_time = n_ticks / TICKS_PER_SECOND
    report.frames_corrupted = link.uplink.corrupted + link.downlink.corrupted
    report.wall_time = time.perf_counter() - started
    logging.info(
        "run '%s' done: gate_passed=%s final_phase=%s wall=%.2fs",
        scenario.name,
        report.gate_passed,
        report.final_phase,
        report.wall_time,
    )
    return RunResult(report, tlog.write_tlog(records), write_csv(trace), trace)


def _trace_row(now, vehicle, controller, companion):
    x, y, depth = (float(v) for v in vehicle.position)
    roll, pitch, yaw = (float(a) for a in vehicle.attitude)
    out = companion.last_output
    row = TraceRow(now, x, y, depth, roll, pitch, yaw, controller.state.pwm, companion.mission.phase.value)
    if out is not None and out.target is not None:
        row = row._replace(det_label=out.target.label, det_score=float(out.target.score))
        if out.offset is not None:
            row = row._replace(dx=float(out.offset[0]), dy=float(out.offset[1]))
    return row


def run_batch(scenarios, workers=None):
    """
    Run many scenarios in parallel, one scheduler per process.

    Returns:
        list: RunResult per scenario, in input order.
    """
    scenarios = list(scenarios)
    if workers == 1 or len(scenarios) <= 1:
        return [run(s) for s in scenarios]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(run, scenarios))
