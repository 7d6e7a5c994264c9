"""Packet-level discrete-event simulation of a store-and-forward network.

Every directed link is a FIFO single server with an infinite buffer; the
packet at the head of a link's deque is the one being transmitted.  There is
no propagation or processing delay, so a packet leaving one link joins the
next one at the same instant.

Randomness comes from independent streams keyed by ``(seed, flow id,
purpose)``, so adding or removing a flow never changes another flow's
arrival times or packet lengths.
"""

from __future__ import annotations

import hashlib
import heapq
import logging
from collections import deque
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .netmodel import (
    NetworkError,
    RoutingDirectory,
    Topology,
    UnstableNetworkError,
    check_stability,
    link_arrival_rates,
    resolve_path,
)

log = logging.getLogger(__name__)

_ARRIVAL = 0
_DEPARTURE = 1


class Mode(str, Enum):
    AKIA = "akia"
    KIA = "kia"


@dataclass(frozen=True)
class SimConfig:
    """Run parameters.  Set exactly one of ``max_packets`` (per flow) or ``max_time``."""

    mode: Mode = Mode.AKIA
    mean_packet_bits: float = 1.0
    max_packets: int | None = None
    max_time: float | None = None
    warmup: float = 0.05
    seed: int = 0
    trace_hops: bool = False
    check_fifo: bool = False

    def __post_init__(self):
        object.__setattr__(self, "mode", Mode(self.mode))
        if (self.max_packets is None) == (self.max_time is None):
            raise ValueError("set exactly one of max_packets or max_time")
        if self.max_packets is not None and self.max_packets < 1:
            raise ValueError("max_packets must be >= 1")
        if self.max_time is not None and not self.max_time > 0:
            raise ValueError("max_time must be positive")
        if not 0.0 <= self.warmup < 1.0:
            raise ValueError("warmup must lie in [0, 1)")
        if not self.mean_packet_bits > 0:
            raise ValueError("mean packet length must be positive")

    @property
    def mu(self) -> float:
        return 1.0 / self.mean_packet_bits


class Packet:
    __slots__ = ("flow", "seq", "birth", "length", "hop", "lengths", "_start_order")

    def __init__(self, flow: int, seq: int, birth: float, length: float):
        self.flow = flow
        self.seq = seq
        self.birth = birth
        self.length = length
        self.hop = 0
        self.lengths = None


@dataclass(frozen=True)
class FlowSamples:
    """Delivered packets of one flow after the warmup discard, in delivery order."""

    flow_id: str
    seq: np.ndarray
    birth: np.ndarray
    delay: np.ndarray
    generated: int
    delivered: int
    in_flight: int
    discarded: int
    hop_lengths: np.ndarray | None = None


@dataclass(frozen=True)
class DelaySamples:
    flows: dict[str, FlowSamples]
    end_time: float
    config: SimConfig

    def __getitem__(self, flow_id: str) -> np.ndarray:
        return self.flows[flow_id].delay

    def __iter__(self):
        return iter(self.flows)


def stream_seed(seed: int, *key) -> np.random.SeedSequence:
    """Seed sequence for an entity, stable across runs and Python processes."""
    words = [int(seed) & 0xFFFFFFFFFFFFFFFF]
    for part in key:
        digest = hashlib.blake2b(str(part).encode(), digest_size=8).digest()
        words.append(int.from_bytes(digest, "little"))
    return np.random.SeedSequence(words)


class ExpStream:
    """Buffered inverse-transform exponential variates from one PCG64 stream."""

    __slots__ = ("_rng", "_scale", "_buf", "_i", "_n")

    def __init__(self, seq: np.random.SeedSequence, mean: float, block: int = 8192):
        self._rng = np.random.Generator(np.random.PCG64(seq))
        self._scale = mean
        self._n = block
        self._refill()

    def _refill(self):
        u = self._rng.random(self._n)
        self._buf = (-np.log1p(-u) * self._scale).tolist()
        self._i = 0

    def next(self) -> float:
        if self._i == self._n:
            self._refill()
        x = self._buf[self._i]
        self._i += 1
        return x


def run_simulation(
    topology: Topology, directory: RoutingDirectory, flows, config: SimConfig
) -> DelaySamples:
    flows = list(flows)
    if not flows:
        raise NetworkError("nothing to simulate: no flows")
    state = link_arrival_rates(topology, directory, flows, config.mu)
    overloaded = check_stability(state)
    if overloaded:
        raise UnstableNetworkError(overloaded)

    link_index = {link: i for i, link in enumerate(topology.links)}
    capacity = [topology.capacity[l] for l in topology.links]
    queues: list[deque] = [deque() for _ in capacity]
    paths = [[link_index[l] for l in resolve_path(directory, f).links] for f in flows]
    n_flows = len(flows)
    mean_len = config.mean_packet_bits
    gaps = [ExpStream(stream_seed(config.seed, f.id, "arrivals"), 1.0 / f.rate) for f in flows]
    lengths = [ExpStream(stream_seed(config.seed, f.id, "length"), mean_len) for f in flows]
    kia = config.mode is Mode.KIA
    relen = (
        [ExpStream(stream_seed(config.seed, f.id, "hop-length"), mean_len) for f in flows]
        if kia
        else None
    )
    trace = config.trace_hops
    check_fifo = config.check_fifo
    started = [0] * len(capacity)
    finished = [0] * len(capacity)

    generated = [0] * n_flows
    delivered = [0] * n_flows
    out_seq: list[list[int]] = [[] for _ in flows]
    out_birth: list[list[float]] = [[] for _ in flows]
    out_delay: list[list[float]] = [[] for _ in flows]
    out_lengths: list[list] = [[] for _ in flows]
    max_packets = config.max_packets
    max_time = config.max_time if config.max_time is not None else float("inf")
    flows_done = 0

    heap: list = []
    push = heapq.heappush
    pop = heapq.heappop
    counter = 0
    for i in range(n_flows):
        push(heap, (gaps[i].next(), counter, _ARRIVAL, i))
        counter += 1

    now = 0.0
    while heap:
        t, _, kind, idx = heap[0]
        if t > max_time:
            break
        pop(heap)
        now = t
        if kind == _DEPARTURE:
            q = queues[idx]
            pkt = q.popleft()
            if check_fifo:
                assert pkt._start_order == finished[idx], "FIFO order violated"
                finished[idx] += 1
            if q:
                nxt = q[0]
                if check_fifo:
                    nxt._start_order = started[idx]
                    started[idx] += 1
                push(heap, (t + nxt.length / capacity[idx], counter, _DEPARTURE, idx))
                counter += 1
            fi = pkt.flow
            path = paths[fi]
            pkt.hop += 1
            if pkt.hop == len(path):
                n = delivered[fi]
                delivered[fi] = n + 1
                if max_packets is None or n < max_packets:
                    out_seq[fi].append(pkt.seq)
                    out_birth[fi].append(pkt.birth)
                    out_delay[fi].append(t - pkt.birth)
                    if trace:
                        out_lengths[fi].append(pkt.lengths)
                    if max_packets is not None and n + 1 == max_packets:
                        flows_done += 1
                        if flows_done == n_flows:
                            break
                continue
            if kia:
                pkt.length = relen[fi].next()
            link = path[pkt.hop]
        else:
            fi = idx
            pkt = Packet(fi, generated[fi], t, lengths[fi].next())
            generated[fi] += 1
            if trace:
                pkt.lengths = []
            push(heap, (t + gaps[fi].next(), counter, _ARRIVAL, fi))
            counter += 1
            link = paths[fi][0]
        if trace:
            pkt.lengths.append(pkt.length)
        q = queues[link]
        q.append(pkt)
        if len(q) == 1:
            if check_fifo:
                pkt._start_order = started[link]
                started[link] += 1
            push(heap, (t + pkt.length / capacity[link], counter, _DEPARTURE, link))
            counter += 1

    result = {}
    for i, f in enumerate(flows):
        kept = len(out_delay[i])
        cut = int(config.warmup * kept)
        hop_lengths = None
        if trace:
            hop_lengths = np.array(out_lengths[i][cut:], dtype=float).reshape(-1, len(paths[i]))
        result[f.id] = FlowSamples(
            flow_id=f.id,
            seq=np.array(out_seq[i][cut:], dtype=np.int64),
            birth=np.array(out_birth[i][cut:], dtype=float),
            delay=np.array(out_delay[i][cut:], dtype=float),
            generated=generated[i],
            delivered=delivered[i],
            in_flight=generated[i] - delivered[i],
            discarded=cut,
            hop_lengths=hop_lengths,
        )
    return DelaySamples(result, now, config)


def split_seed(seed: int, rep: int) -> int:
    """Seed for replication ``rep``; replication 0 keeps the base seed."""
    if rep == 0:
        return seed
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(rep,))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def replicate(topology, directory, flows, config: SimConfig, n_reps: int, workers: int = 1):
    """``n_reps`` independent runs with split seeds, returned in replication order."""
    if n_reps < 1:
        raise ValueError("n_reps must be >= 1")
    from dataclasses import replace

    configs = [replace(config, seed=split_seed(config.seed, r)) for r in range(n_reps)]
    if workers <= 1 or n_reps == 1:
        return [run_simulation(topology, directory, flows, c) for c in configs]
    from concurrent.futures import ProcessPoolExecutor

    with ProcessPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(run_simulation, topology, directory, list(flows), c) for c in configs]
        return [fut.result() for fut in futures]
