"""Tiered AS-like topology generator.

Nodes are split into capacity tiers, fastest first.  The top tier is a full
mesh; every later node attaches to already placed nodes of faster tiers,
picked with probability proportional to ``degree + 1``.  Middle-tier nodes
get two uplinks where possible, bottom-tier (edge) nodes one.  Each
undirected edge becomes two directed links whose capacity is the slower
endpoint's tier capacity.

Suggested flows run between edge-tier nodes in both directions, like host
pairs attached to access routers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_TIERS = ((10e9, 0.1), (1e9, 0.3), (100e6, 0.6))


class TopologyGenError(ValueError):
    pass


@dataclass(frozen=True)
class Tier:
    capacity_bps: float
    share: float


def parse_tiers(text: str) -> list[Tier]:
    """``"10e9:0.1,1e9:0.3,100e6:0.6"`` -> tiers.  A bare capacity means share 1."""
    tiers = []
    for part in text.split(","):
        cap, _, share = part.strip().partition(":")
        tiers.append(Tier(float(cap), float(share) if share else 1.0))
    return tiers


def tier_sizes(n_nodes: int, tiers) -> list[int]:
    if n_nodes < 2:
        raise TopologyGenError("need at least 2 nodes")
    if n_nodes < len(tiers):
        raise TopologyGenError(f"{n_nodes} nodes cannot fill {len(tiers)} tiers")
    total = sum(t.share for t in tiers)
    sizes = [max(1, round(n_nodes * t.share / total)) for t in tiers[:-1]]
    sizes.append(n_nodes - sum(sizes))
    if sizes[-1] < 1:
        raise TopologyGenError(f"tier shares leave no nodes for the last tier (sizes {sizes})")
    return sizes


def _pick(rng, candidates, degree, k):
    cand = list(candidates)
    chosen = []
    for _ in range(min(k, len(cand))):
        w = np.array([degree[c] + 1.0 for c in cand])
        i = int(rng.choice(len(cand), p=w / w.sum()))
        chosen.append(cand.pop(i))
    return chosen


def generate_topology(n_nodes: int, seed: int, tiers=None):
    """Return ``(tier_of_node, edges, capacities)`` with undirected ``edges``."""
    tiers = [Tier(*t) if not isinstance(t, Tier) else t for t in (tiers or DEFAULT_TIERS)]
    sizes = tier_sizes(n_nodes, tiers)
    rng = np.random.default_rng(seed)
    tier_of = [k for k, size in enumerate(sizes) for _ in range(size)]
    degree = [0] * n_nodes
    edges = set()

    def connect(u, v):
        edges.add((min(u, v), max(u, v)))
        degree[u] += 1
        degree[v] += 1

    last = len(sizes) - 1
    top = [u for u in range(n_nodes) if tier_of[u] == 0]
    if len(sizes) == 1:
        # single tier: grow a connected graph by preferential attachment
        for u in range(1, n_nodes):
            for v in _pick(rng, range(u), degree, 2):
                connect(u, v)
    else:
        for i, u in enumerate(top):
            for v in top[:i]:
                connect(u, v)
        for u in range(len(top), n_nodes):
            parents = [v for v in range(u) if tier_of[v] < tier_of[u]]
            k = 1 if tier_of[u] == last else 2
            for v in _pick(rng, parents, degree, k):
                connect(u, v)
    capacity = {}
    for u, v in sorted(edges):
        c = min(tiers[tier_of[u]].capacity_bps, tiers[tier_of[v]].capacity_bps)
        capacity[(u, v)] = c
        capacity[(v, u)] = c
    return tier_of, sorted(edges), capacity


def suggest_flows(tier_of, n_flows: int, seed: int):
    """Flow endpoint pairs between bottom-tier nodes, both directions per pair."""
    last = max(tier_of)
    pool = [u for u, t in enumerate(tier_of) if t == last]
    if len(pool) < 2:
        pool = list(range(len(tier_of)))
    rng = np.random.default_rng([seed, 1])
    pairs = []
    while len(pairs) < n_flows:
        a, b = (int(x) for x in rng.choice(pool, size=2, replace=False))
        pairs.append((a, b))
        if len(pairs) < n_flows:
            pairs.append((b, a))
    return pairs


def scenario_document(
    n_nodes: int,
    seed: int,
    tiers=None,
    n_flows: int = 100,
    flow_rate_bps: float = 2e6,
    mean_packet_bytes: float = 186.0,
    sim_seconds: float = 20.0,
) -> dict:
    tier_of, _, capacity = generate_topology(n_nodes, seed, tiers)
    rate = flow_rate_bps / (mean_packet_bytes * 8)
    return {
        "nodes": [str(u) for u in range(n_nodes)],
        "tiers": [int(t) for t in tier_of],
        "links": [
            {"u": str(u), "v": str(v), "capacity_bps": c} for (u, v), c in sorted(capacity.items())
        ],
        "flows": [
            {"id": str(i + 1), "src": str(a), "dst": str(b), "rate_pps": rate}
            for i, (a, b) in enumerate(suggest_flows(tier_of, n_flows, seed))
        ],
        "traffic": {"mean_packet_bytes": mean_packet_bytes},
        "routing": {"metric": "hops"},
        "sim": {"mode": "akia", "stop": {"seconds": sim_seconds}, "warmup": 0.05, "seed": seed},
    }
