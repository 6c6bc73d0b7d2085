"""
Simulated serial link between companion computer and flight controller.

Each direction is a LinkEndpoint: a FIFO of frames with a transport delay,
an optional single-bit corruption fault, and the heartbeat bookkeeping used
for the 1 Hz heartbeat and the link-loss failsafe.
"""

import math
from collections import deque
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

from auvsitl import rng

LATENCY_PRESETS = {
    # tethered Fathom-X ethernet vs. radio; placeholders, no measured figures exist
    "wired": 0.005,
    "wireless": 0.03,
}


class Delivery(NamedTuple):
    """A frame leaving the link: bytes as delivered and as originally sent."""

    due: float
    frame: bytes
    sent: bytes


class LinkState(Enum):
    OK = "Ok"
    LOST = "Lost"


@dataclass(frozen=True)
class LinkConfig:
    """
    Transport parameters shared by both directions of a link.

    Attributes:
        latency (float): One-way delay in seconds, >= 0.
        bit_corruption_prob (float): Probability that a frame gets one bit flipped.
        seed (int): Seed of the corruption streams.
        heartbeat_interval (float): Seconds between outgoing heartbeats.
        failsafe_timeout (float): Seconds without a received heartbeat before Lost.
    """

    latency: float = LATENCY_PRESETS["wired"]
    bit_corruption_prob: float = 0.0
    seed: int = 0
    heartbeat_interval: float = 1.0
    failsafe_timeout: float = 3.0

    def __post_init__(self):
        if not (math.isfinite(self.latency) and self.latency >= 0.0):
            raise ValueError(f"latency must be finite and >= 0, got {self.latency}")
        if not 0.0 <= self.bit_corruption_prob <= 1.0:
            raise ValueError(
                f"bit_corruption_prob must be in [0, 1], got {self.bit_corruption_prob}"
            )
        if self.heartbeat_interval <= 0 or self.failsafe_timeout <= 0:
            raise ValueError("heartbeat_interval and failsafe_timeout must be > 0")


class LinkEndpoint:
    """
    Outbound side of one link direction.

    Attributes:
        config (LinkConfig): Transport parameters.
        queue (deque): Delivery entries ordered by due time.
        corrupted (int): Frames that had a bit flipped.
        last_heartbeat_rx (float): Time the owner last received a heartbeat.
        last_heartbeat_tx (float): Time the owner last sent a heartbeat.
    """

    def __init__(self, config, name="link"):
        self.config = config
        self.name = name
        self.queue = deque()
        self.corrupted = 0
        self.last_heartbeat_rx = -math.inf
        self.last_heartbeat_tx = -math.inf
        self._rng = rng.stream(config.seed, "link", name)

    def transmit(self, frame, now):
        """
        Enqueue a frame for delivery at now + latency.

        With probability bit_corruption_prob exactly one uniformly chosen bit
        of the frame is flipped; frames are never dropped.
        """
        if not frame:
            raise ValueError("cannot transmit an empty frame")
        sent = bytes(frame)
        data = sent
        due = now + self.config.latency
        if self.queue and due < self.queue[-1].due:
            raise ValueError(f"{self.name}: transmit time went backwards ({now})")
        if self._rng.random() < self.config.bit_corruption_prob:
            bit = self._rng.randrange(len(data) * 8)
            mangled = bytearray(data)
            mangled[bit // 8] ^= 1 << (bit % 8)
            data = bytes(mangled)
            self.corrupted += 1
        self.queue.append(Delivery(due, data, sent))

    def poll_deliveries(self, now):
        """Remove and return, in order, every Delivery due by now."""
        out = []
        while self.queue and self.queue[0].due <= now + 1e-9:
            out.append(self.queue.popleft())
        return out

    def poll(self, now):
        """Remove and return, in order, every frame due by now."""
        return [d.frame for d in self.poll_deliveries(now)]

    def heartbeat_due(self, now):
        return now - self.last_heartbeat_tx >= self.config.heartbeat_interval

    def note_heartbeat_tx(self, now):
        self.last_heartbeat_tx = max(self.last_heartbeat_tx, now)

    def note_heartbeat_rx(self, now):
        self.last_heartbeat_rx = max(self.last_heartbeat_rx, now)

    def failsafe_state(self, now):
        if now - self.last_heartbeat_rx > self.config.failsafe_timeout:
            return LinkState.LOST
        return LinkState.OK


class DuplexLink:
    """
    The companion <-> flight controller serial path.

    uplink carries companion -> fcu frames, downlink fcu -> companion frames.
    Each has its own corruption stream.
    """

    def __init__(self, config):
        self.config = config
        self.uplink = LinkEndpoint(config, "uplink")
        self.downlink = LinkEndpoint(config, "downlink")
