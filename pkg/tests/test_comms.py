import numpy as np
import pytest

from uavloc.core import UavPose, rng_stream, vec2
from uavloc.comms import (CommsConfig, EdgeQueue, Packet, build_connectivity,
                          disseminate_u2u)


def chain_graph(n):
    """n nodes in a line, adjacent-only links (spacing 400 m, range 500 m)."""
    poses = [UavPose(id=i, position=vec2(400.0 * i, 0)) for i in range(n)]
    return build_connectivity(poses, range_m=500.0)


def test_connectivity_pairwise_distances():
    poses = [UavPose(id=0, position=vec2(0, 0)),
             UavPose(id=1, position=vec2(400, 0)),
             UavPose(id=2, position=vec2(900, 0))]
    g = build_connectivity(poses, range_m=500.0)
    assert g.edges == {frozenset((0, 1)), frozenset((1, 2))}
    g2 = build_connectivity(poses, range_m=1000.0)
    assert g2.edges == {frozenset((0, 1)), frozenset((1, 2)), frozenset((0, 2))}


def test_connectivity_rejects_duplicate_ids():
    with pytest.raises(ValueError):
        build_connectivity([UavPose(id=1, position=vec2(0, 0)),
                            UavPose(id=1, position=vec2(1, 0))], 10.0)


def test_chain_delivery_probability_matches_link_product():
    # Three independent links at 0.8 success each: end-to-end 0.8^3 = 0.512.
    g = chain_graph(4)
    rng = rng_stream(314, 0)
    delivered = 0
    trials = 10_000
    for t in range(trials):
        inbox = disseminate_u2u(g, [Packet(src_id=0, created_step=t, payload=None)],
                                max_hops=3, link_loss=0.2, rng=rng)
        delivered += int(any(p.src_id == 0 for p in inbox[3]))
    assert abs(delivered / trials - 0.8 ** 3) < 0.02


def test_lossless_flood_reaches_everyone():
    g = chain_graph(4)  # diameter 3
    packets = [Packet(src_id=i, created_step=0, payload=i) for i in range(4)]
    inbox = disseminate_u2u(g, packets, max_hops=3, link_loss=0.0, rng=rng_stream(1, 0))
    for node in range(4):
        assert sorted(p.src_id for p in inbox[node]) == [0, 1, 2, 3]


def test_hop_limit_is_never_exceeded():
    g = chain_graph(6)
    packets = [Packet(src_id=0, created_step=0, payload=None)]
    inbox = disseminate_u2u(g, packets, max_hops=3, link_loss=0.0, rng=rng_stream(2, 0))
    assert all(not inbox[n] for n in (4, 5))
    for node, copies in inbox.items():
        for p in copies:
            assert p.hops_traversed <= 3
            assert p.hops_traversed == node  # chain distance


def test_isolated_node_receives_only_its_own_packets():
    poses = [UavPose(id=0, position=vec2(0, 0)),
             UavPose(id=1, position=vec2(100, 0)),
             UavPose(id=2, position=vec2(5000, 0))]
    g = build_connectivity(poses, range_m=500.0)
    packets = [Packet(src_id=i, created_step=3, payload=None) for i in range(3)]
    inbox = disseminate_u2u(g, packets, max_hops=3, link_loss=0.0, rng=rng_stream(3, 0))
    assert [p.src_id for p in inbox[2]] == [2]
    assert inbox[2][0].hops_traversed == 0


def test_duplicate_packets_deduplicated_by_source_and_step():
    g = chain_graph(2)
    dup = [Packet(src_id=0, created_step=5, payload="a"),
           Packet(src_id=0, created_step=5, payload="a-again"),
           Packet(src_id=0, created_step=6, payload="b")]
    inbox = disseminate_u2u(g, dup, max_hops=3, link_loss=0.0, rng=rng_stream(4, 0))
    keys = [(p.src_id, p.created_step) for p in inbox[1]]
    assert keys == [(0, 5), (0, 6)]


def test_edge_queue_delay_one():
    q = EdgeQueue(delay=1)
    q.enqueue(Packet(src_id=1, created_step=5, payload="m"), now=5)
    assert q.deliver(now=5) == []
    out = q.deliver(now=6)
    assert len(out) == 1 and out[0].payload == "m"


def test_edge_queue_zero_delay_identity():
    q = EdgeQueue(delay=0)
    p = Packet(src_id=1, created_step=5, payload="m")
    q.enqueue(p, now=5)
    assert q.deliver(now=5) == [p]


def test_edge_queue_replays_fifo_after_fixed_delay():
    # Queue-replay oracle: packet k enqueued at step k must emerge at k + 3,
    # in enqueue order.
    q = EdgeQueue(delay=3)
    for k in range(6):
        q.enqueue(Packet(src_id=0, created_step=k, payload=k), now=k)
        out = q.deliver(now=k)
        expected = [k - 3] if k >= 3 else []
        assert [p.payload for p in out] == expected
    for k in range(6, 9):
        assert [p.payload for p in q.deliver(now=k)] == [k - 3]
    assert q.pending == []


def test_edge_queue_conserves_packets():
    q = EdgeQueue(delay=2)
    sent, got = [], []
    for k in range(10):
        pkt = Packet(src_id=0, created_step=k, payload=k)
        q.enqueue(pkt, now=k)
        sent.append(pkt)
        got.extend(q.deliver(now=k))
    pending = [p for _, _, p in q.pending]
    assert sorted(p.payload for p in got + pending) == sorted(p.payload for p in sent)


def test_edge_queue_rejects_backwards_clock():
    q = EdgeQueue(delay=1)
    q.deliver(now=4)
    with pytest.raises(ValueError):
        q.deliver(now=3)


def test_comms_config_validation():
    with pytest.raises(ValueError):
        CommsConfig(mode="carrier-pigeon")
    with pytest.raises(ValueError):
        CommsConfig(link_loss=1.5)
    with pytest.raises(ValueError):
        CommsConfig(max_hops=0)
    with pytest.raises(ValueError):
        CommsConfig(edge_delay=-1)
