import math

import pytest

from auvsitl import mavproto
from auvsitl.link import DuplexLink, LinkConfig, LinkEndpoint, LinkState

FRAME = bytes.fromhex("fe0900010100000000000c03000403722d")


def test_zero_latency_is_available_immediately():
    ep = LinkEndpoint(LinkConfig(latency=0.0))
    ep.transmit(FRAME, 1.0)
    assert ep.poll(1.0) == [FRAME]


def test_latency_delays_delivery():
    ep = LinkEndpoint(LinkConfig(latency=0.05))
    ep.transmit(FRAME, 1.0)
    assert ep.poll(1.04) == []
    assert ep.poll(1.05) == [FRAME]
    assert ep.poll(2.0) == []


def test_poll_returns_only_due_frames_in_order():
    ep = LinkEndpoint(LinkConfig(latency=0.0))
    assert ep.poll(0.0) == []
    ep.transmit(b"\x01", 1.0)
    ep.transmit(b"\x02", 1.1)
    assert ep.poll(1.05) == [b"\x01"]
    assert ep.poll(1.1) == [b"\x02"]


def test_transmit_rejects_empty_and_backwards_time():
    ep = LinkEndpoint(LinkConfig())
    with pytest.raises(ValueError):
        ep.transmit(b"", 0.0)
    ep.transmit(FRAME, 2.0)
    with pytest.raises(ValueError):
        ep.transmit(FRAME, 1.0)


def test_full_corruption_fails_every_crc():
    ep = LinkEndpoint(LinkConfig(latency=0.0, bit_corruption_prob=1.0, seed=9))
    for i in range(200):
        ep.transmit(FRAME, i * 0.01)
    delivered = ep.poll(10.0)
    assert len(delivered) == 200
    assert ep.corrupted == 200
    for frame in delivered:
        # exactly one bit differs
        assert sum(bin(a ^ b).count("1") for a, b in zip(frame, FRAME)) == 1
        result = mavproto.decode_stream(frame)
        assert result.messages == []


def test_deliveries_keep_the_sent_bytes():
    ep = LinkEndpoint(LinkConfig(latency=0.0, bit_corruption_prob=1.0, seed=2))
    ep.transmit(FRAME, 0.0)
    (delivery,) = ep.poll_deliveries(0.0)
    assert delivery.sent == FRAME
    assert delivery.frame != FRAME


def test_same_seed_same_corruption():
    def stream(seed):
        ep = LinkEndpoint(LinkConfig(latency=0.0, bit_corruption_prob=0.3, seed=seed))
        for i in range(100):
            ep.transmit(FRAME, i * 0.01)
        return ep.poll(5.0)

    assert stream(4) == stream(4)
    assert stream(4) != stream(5)


def test_duplex_directions_have_independent_streams():
    link = DuplexLink(LinkConfig(latency=0.0, bit_corruption_prob=0.5, seed=1))
    for i in range(50):
        link.uplink.transmit(FRAME, i * 0.01)
        link.downlink.transmit(FRAME, i * 0.01)
    assert link.uplink.poll(1.0) != link.downlink.poll(1.0)


def test_heartbeat_due():
    ep = LinkEndpoint(LinkConfig())
    assert ep.last_heartbeat_tx == -math.inf
    assert ep.heartbeat_due(0.0)
    ep.note_heartbeat_tx(0.0)
    assert not ep.heartbeat_due(0.5)
    assert ep.heartbeat_due(1.0)


def test_failsafe_threshold():
    ep = LinkEndpoint(LinkConfig())
    assert ep.failsafe_state(0.0) == LinkState.LOST
    ep.note_heartbeat_rx(10.0)
    assert ep.failsafe_state(12.9) == LinkState.OK
    assert ep.failsafe_state(13.1) == LinkState.LOST


def test_heartbeat_timestamps_are_monotone():
    ep = LinkEndpoint(LinkConfig())
    ep.note_heartbeat_rx(5.0)
    ep.note_heartbeat_rx(4.0)
    assert ep.last_heartbeat_rx == 5.0


def test_config_validation():
    with pytest.raises(ValueError):
        LinkConfig(latency=-0.1)
    with pytest.raises(ValueError):
        LinkConfig(latency=math.inf)
    with pytest.raises(ValueError):
        LinkConfig(bit_corruption_prob=1.5)
