"""Packet movement between UAVs (multi-hop, lossy) or through an edge (delayed).

U2U dissemination floods along shortest paths with an independent Bernoulli
loss per link traversal, and a copy that crosses h hops ages by h steps.
The edge path is lossless but delivers after a fixed delay.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from .core import UavPose


@dataclass
class Packet:
    """Networked envelope around a payload (measurement, experience, summary)."""

    src_id: int
    created_step: int
    payload: Any
    hops_traversed: int = 0

    def __post_init__(self):
        if self.hops_traversed < 0:
            raise ValueError("hops_traversed cannot be negative")


@dataclass
class MapSummary:
    """Compact per-UAV mapping progress report sent to the edge."""

    uav_id: int
    step: int
    cells_mapped: int


@dataclass
class CommsConfig:
    mode: str = "edge"  # "u2u" or "edge"
    range_m: float = 1000.0
    max_hops: int = 3
    link_loss: float = 0.2
    edge_delay: int = 1
    # "total": sense at t, command applied at t + edge_delay.
    # "each_way": uplink and downlink each cost edge_delay steps.
    delay_mode: str = "total"

    def __post_init__(self):
        if self.mode not in ("u2u", "edge"):
            raise ValueError(f"unknown comms mode {self.mode!r}")
        if not (0.0 <= self.link_loss <= 1.0):
            raise ValueError("link_loss must be a probability")
        if self.max_hops < 1:
            raise ValueError("max_hops must be at least 1")
        if self.edge_delay < 0:
            raise ValueError("edge_delay cannot be negative")
        if self.delay_mode not in ("total", "each_way"):
            raise ValueError(f"unknown delay_mode {self.delay_mode!r}")


class ConnectivityGraph:
    """Undirected proximity graph over UAV ids."""

    def __init__(self, node_ids, edges):
        self.node_ids = sorted(node_ids)
        self._adj: dict[int, set[int]] = {i: set() for i in self.node_ids}
        for a, b in edges:
            if a == b:
                raise ValueError("self-edges are not allowed")
            self._adj[a].add(b)
            self._adj[b].add(a)

    def neighbors(self, node_id: int) -> set[int]:
        return self._adj[node_id]

    def degree(self, node_id: int) -> int:
        return len(self._adj[node_id])

    @property
    def edges(self) -> set[frozenset]:
        return {frozenset((a, b)) for a in self.node_ids for b in self._adj[a]}

    def hop_distances(self, src: int) -> dict[int, int]:
        """BFS hop distance from src to every reachable node."""
        dist = {src: 0}
        frontier = [src]
        while frontier:
            nxt = []
            for u in frontier:
                for v in sorted(self._adj[u]):
                    if v not in dist:
                        dist[v] = dist[u] + 1
                        nxt.append(v)
            frontier = nxt
        return dist


def build_connectivity(positions: list[UavPose], range_m: float) -> ConnectivityGraph:
    """Proximity graph: edge (i, j) iff the pair is within range_m."""
    if not positions:
        raise ValueError("need at least one UAV")
    ids = [p.id for p in positions]
    if len(set(ids)) != len(ids):
        raise ValueError("UAV ids must be distinct")
    edges = []
    for i, a in enumerate(positions):
        for b in positions[i + 1:]:
            if float(np.linalg.norm(a.position - b.position)) <= range_m:
                edges.append((a.id, b.id))
    return ConnectivityGraph(ids, edges)


def disseminate_u2u(graph: ConnectivityGraph, packets: list[Packet], max_hops: int,
                    link_loss: float, rng: np.random.Generator,
                    events: list | None = None) -> dict[int, list[Packet]]:
    """Flood packets along shortest paths with per-link Bernoulli loss.

    Every node receives its own packet at zero hops. A node at graph hop
    distance h from the source receives a copy (hops_traversed = h) iff
    h <= max_hops and at least one link from a holding neighbor at distance
    h-1 survives; each link traversal drops independently with probability
    link_loss. Deliveries are de-duplicated by (src_id, created_step).
    """
    if max_hops < 1:
        raise ValueError("max_hops must be at least 1")
    inbox: dict[int, list[Packet]] = {i: [] for i in graph.node_ids}
    seen: dict[int, set] = {i: set() for i in graph.node_ids}

    for packet in packets:
        key = (packet.src_id, packet.created_step)
        dist = graph.hop_distances(packet.src_id)
        if key not in seen[packet.src_id]:
            seen[packet.src_id].add(key)
            inbox[packet.src_id].append(dataclasses.replace(packet, hops_traversed=0))
        holders = {packet.src_id}
        for h in range(1, max_hops + 1):
            ring = sorted(v for v, d in dist.items() if d == h)
            arrived = []
            for v in ring:
                parents = sorted(u for u in graph.neighbors(v)
                                 if dist.get(u) == h - 1 and u in holders)
                got = False
                for u in parents:
                    dropped = bool(rng.random() < link_loss)
                    if events is not None:
                        events.append((packet.created_step, u, v, h, int(dropped)))
                    got = got or not dropped
                if got:
                    arrived.append(v)
                    if key not in seen[v]:
                        seen[v].add(key)
                        inbox[v].append(dataclasses.replace(packet, hops_traversed=h))
            holders.update(arrived)
    return inbox


@dataclass
class EdgeQueue:
    """Lossless FIFO with a fixed delivery delay in steps."""

    delay: int
    pending: list = field(default_factory=list)
    _seq: int = 0
    _last_now: int = -1

    def __post_init__(self):
        if self.delay < 0:
            raise ValueError("delay cannot be negative")

    def enqueue(self, packet: Packet, now: int) -> None:
        self.pending.append((now + self.delay, self._seq, packet))
        self._seq += 1

    def deliver(self, now: int) -> list[Packet]:
        if now < self._last_now:
            raise ValueError(f"edge clock moved backwards: {self._last_now} -> {now}")
        self._last_now = now
        due = sorted((item for item in self.pending if item[0] <= now),
                     key=lambda item: (item[0], item[1]))
        self.pending = [item for item in self.pending if item[0] > now]
        return [packet for _, _, packet in due]
