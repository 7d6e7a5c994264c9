"""Network model: directed topology, flows, fixed routing and per-link load.

Node ids are dense 0-based integers.  A routing directory is an ``N x N``
next-hop matrix indexed ``[current, destination]`` with ``-1`` for "none".
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import shortest_path

log = logging.getLogger(__name__)

NO_HOP = -1
LOAD_WARNING = 0.95

Link = tuple[int, int]


class NetworkError(ValueError):
    pass


class UnroutableFlowError(NetworkError):
    pass


class UnstableNetworkError(NetworkError):
    def __init__(self, links):
        self.links = list(links)
        super().__init__(f"links at or above capacity: {self.links}")


@dataclass(frozen=True)
class Topology:
    n_nodes: int
    capacity: Mapping[Link, float]
    labels: tuple[str, ...] = ()

    def __post_init__(self):
        if self.n_nodes < 1:
            raise NetworkError("topology needs at least one node")
        for (u, v), c in self.capacity.items():
            if u == v:
                raise NetworkError(f"self-loop on node {u}")
            if not (0 <= u < self.n_nodes and 0 <= v < self.n_nodes):
                raise NetworkError(f"link ({u}, {v}) references an unknown node")
            if not c > 0:
                raise NetworkError(f"link ({u}, {v}) has non-positive capacity {c}")
        if self.labels and len(self.labels) != self.n_nodes:
            raise NetworkError("labels must name every node")
        if len(set(self.labels)) != len(self.labels):
            raise NetworkError("node labels must be unique")
        object.__setattr__(self, "capacity", dict(self.capacity))

    @property
    def links(self) -> list[Link]:
        return sorted(self.capacity)

    def label(self, node: int) -> str:
        return self.labels[node] if self.labels else str(node)


@dataclass(frozen=True)
class Flow:
    id: str
    source: int
    destination: int
    rate: float  # packets/second

    def __post_init__(self):
        if self.source == self.destination:
            raise NetworkError(f"flow {self.id}: source equals destination")
        if not self.rate > 0:
            raise NetworkError(f"flow {self.id}: arrival rate must be positive, got {self.rate}")


@dataclass(frozen=True)
class RoutingDirectory:
    next_hop: np.ndarray

    def __post_init__(self):
        self.next_hop.setflags(write=False)

    @property
    def n_nodes(self) -> int:
        return self.next_hop.shape[0]


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]

    def __post_init__(self):
        if len(self.nodes) < 2:
            raise NetworkError("a path needs at least one link")
        if len(set(self.nodes)) != len(self.nodes):
            raise NetworkError(f"path revisits a node: {self.nodes}")

    @property
    def hops(self) -> int:
        return len(self.nodes) - 1

    @property
    def links(self) -> list[Link]:
        return list(zip(self.nodes[:-1], self.nodes[1:]))


@dataclass(frozen=True)
class LinkState:
    """Per-link arrival rate, load and M/M/1 sojourn rate for a given 1/mu."""

    mu: float  # 1/bits
    capacity: Mapping[Link, float]
    arrival_rate: Mapping[Link, float]
    load: Mapping[Link, float] = field(init=False)
    theta: Mapping[Link, float] = field(init=False)

    def __post_init__(self):
        load = {}
        theta = {}
        for link, c in self.capacity.items():
            lam = self.arrival_rate.get(link, 0.0)
            load[link] = lam / (self.mu * c)
            theta[link] = self.mu * c - lam
        object.__setattr__(self, "capacity", dict(self.capacity))
        object.__setattr__(self, "arrival_rate", dict(self.arrival_rate))
        object.__setattr__(self, "load", load)
        object.__setattr__(self, "theta", theta)


def _weights(topology: Topology, weight) -> dict[Link, float]:
    if weight is None or weight == "hops":
        return {link: 1.0 for link in topology.capacity}
    if weight == "inverse_capacity":
        cmax = max(topology.capacity.values())
        return {link: cmax / c for link, c in topology.capacity.items()}
    if callable(weight):
        return {link: float(weight(link, c)) for link, c in topology.capacity.items()}
    if isinstance(weight, str):
        raise NetworkError(f"unknown routing metric '{weight}'")
    try:
        return {link: float(weight[link]) for link in topology.capacity}
    except KeyError as exc:
        raise NetworkError(f"no weight for link {exc.args[0]}") from exc


def build_routing(topology: Topology, weight=None) -> RoutingDirectory:
    """Shortest-path next-hop directory.

    ``weight`` is ``"hops"`` (default), ``"inverse_capacity"``, a mapping
    link -> positive weight, or a callable ``(link, capacity) -> weight``.
    Among equally short continuations the lowest next-hop id wins.
    """
    n = topology.n_nodes
    w = _weights(topology, weight)
    if any(x <= 0 for x in w.values()):
        raise NetworkError("routing weights must be positive")
    next_hop = np.full((n, n), NO_HOP, dtype=np.int64)
    if not w:
        return RoutingDirectory(next_hop)
    rows, cols = zip(*w)
    graph = csr_matrix((list(w.values()), (rows, cols)), shape=(n, n))
    dist = shortest_path(graph, method="D", directed=True)
    out_links: dict[int, list[int]] = {u: [] for u in range(n)}
    for u, v in sorted(w):
        out_links[u].append(v)
    for u in range(n):
        for d in range(n):
            if u == d or not np.isfinite(dist[u, d]):
                continue
            tol = 1e-9 * dist[u, d]
            for v in out_links[u]:
                # strict decrease of the remaining distance keeps paths simple
                if dist[v, d] < dist[u, d] and abs(w[(u, v)] + dist[v, d] - dist[u, d]) <= tol:
                    next_hop[u, d] = v
                    break
    return RoutingDirectory(next_hop)


def resolve_path(directory: RoutingDirectory, flow: Flow) -> Path:
    nodes = [flow.source]
    seen = {flow.source}
    cur = flow.source
    while cur != flow.destination:
        nxt = int(directory.next_hop[cur, flow.destination])
        if nxt == NO_HOP:
            raise UnroutableFlowError(
                f"flow {flow.id}: no route from node {cur} to node {flow.destination}"
            )
        if nxt in seen:
            raise UnroutableFlowError(f"flow {flow.id}: routing loop at node {nxt}")
        nodes.append(nxt)
        seen.add(nxt)
        cur = nxt
    return Path(tuple(nodes))


def link_arrival_rates(
    topology: Topology, directory: RoutingDirectory, flows, mu: float
) -> LinkState:
    """Sum each flow's rate over the links of its routed path."""
    lam = {link: 0.0 for link in topology.capacity}
    for flow in flows:
        for link in resolve_path(directory, flow).links:
            if link not in lam:
                raise NetworkError(f"flow {flow.id} routed over missing link {link}")
            lam[link] += flow.rate
    return LinkState(mu=mu, capacity=dict(topology.capacity), arrival_rate=lam)


def check_stability(state: LinkState) -> list[Link]:
    """Links whose offered bit rate reaches capacity (``rho >= 1``)."""
    bad = [
        link
        for link, c in state.capacity.items()
        if state.arrival_rate[link] / state.mu >= c
    ]
    for link, rho in state.load.items():
        if LOAD_WARNING <= rho < 1.0:
            log.warning("link %s is heavily loaded (rho = %.4f)", link, rho)
    return sorted(bad)
