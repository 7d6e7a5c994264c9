"""Scenario files: one JSON document per experiment.

Layout::

    {
      "nodes":   ["a", "b", "c"],
      "links":   [{"u": "a", "v": "b", "capacity_bps": 1e9, "duplex": false}, ...],
      "flows":   [{"id": "f1", "src": "a", "dst": "c", "rate_pps": 1344.1}, ...],
      "traffic": {"mean_packet_bytes": 186},
      "routing": {"metric": "hops"},
      "sim":     {"mode": "akia", "stop": {"packets": 1000000} | {"seconds": 50},
                  "warmup": 0.05, "seed": 1}
    }

Capacities are bits/second, packet lengths bytes, rates packets/second.
``routing`` and ``sim`` are optional.  Node labels may be strings or
integers; they are mapped to dense ids in the order listed.
"""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, replace
from pathlib import Path as FsPath

from .dessim import Mode, SimConfig
from .netmodel import (
    Flow,
    LinkState,
    NetworkError,
    RoutingDirectory,
    Topology,
    UnstableNetworkError,
    build_routing,
    check_stability,
    link_arrival_rates,
)

log = logging.getLogger(__name__)

ROUTING_METRICS = ("hops", "inverse_capacity")


class ScenarioError(ValueError):
    pass


@dataclass(frozen=True)
class Scenario:
    topology: Topology
    flows: tuple[Flow, ...]
    mean_packet_bits: float
    routing_metric: str
    sim: SimConfig
    directory: RoutingDirectory
    state: LinkState
    source: str = ""

    @property
    def mu(self) -> float:
        return 1.0 / self.mean_packet_bits


def _require(obj, key, where, kind=None):
    if not isinstance(obj, dict) or key not in obj:
        raise ScenarioError(f"{where}: missing field '{key}'")
    val = obj[key]
    if kind is not None and (not isinstance(val, kind) or isinstance(val, bool)):
        raise ScenarioError(f"{where}.{key}: expected {getattr(kind, '__name__', kind)}, got {val!r}")
    return val


def _number(obj, key, where):
    val = _require(obj, key, where, (int, float))
    return float(val)


def _sim_config(raw, mean_bits: float) -> SimConfig:
    raw = raw or {}
    if not isinstance(raw, dict):
        raise ScenarioError("sim: expected an object")
    stop = raw.get("stop", {"packets": 100000})
    if not isinstance(stop, dict) or len(stop) != 1 or not set(stop) <= {"packets", "seconds"}:
        raise ScenarioError("sim.stop: give exactly one of 'packets' or 'seconds'")
    try:
        return SimConfig(
            mode=Mode(str(raw.get("mode", "akia")).lower()),
            mean_packet_bits=mean_bits,
            max_packets=int(stop["packets"]) if "packets" in stop else None,
            max_time=float(stop["seconds"]) if "seconds" in stop else None,
            warmup=float(raw.get("warmup", 0.05)),
            seed=int(raw.get("seed", 0)),
        )
    except ValueError as exc:
        raise ScenarioError(f"sim: {exc}") from exc


def parse_scenario(doc: dict, source: str = "") -> Scenario:
    """Validate a decoded scenario document."""
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a JSON object")
    labels = [str(x) for x in _require(doc, "nodes", "scenario", list)]
    if len(set(labels)) != len(labels):
        raise ScenarioError("nodes: duplicate node label")
    index = {lab: i for i, lab in enumerate(labels)}

    def node(where, raw):
        lab = str(raw)
        if lab not in index:
            raise ScenarioError(f"{where}: unknown node '{lab}'")
        return index[lab]

    capacity = {}
    for k, link in enumerate(_require(doc, "links", "scenario", list)):
        where = f"links[{k}]"
        u = node(f"{where}.u", _require(link, "u", where))
        v = node(f"{where}.v", _require(link, "v", where))
        c = _number(link, "capacity_bps", where)
        if c <= 0:
            raise ScenarioError(f"{where}.capacity_bps: must be positive, got {c}")
        if u == v:
            raise ScenarioError(f"{where}: self-loop on node '{labels[u]}'")
        pairs = [(u, v), (v, u)] if link.get("duplex", False) else [(u, v)]
        for pair in pairs:
            if pair in capacity:
                raise ScenarioError(f"{where}: duplicate link {labels[pair[0]]}->{labels[pair[1]]}")
            capacity[pair] = c

    traffic = _require(doc, "traffic", "scenario", dict)
    mean_bytes = _number(traffic, "mean_packet_bytes", "traffic")
    if mean_bytes <= 0:
        raise ScenarioError("traffic.mean_packet_bytes: must be positive")
    mean_bits = 8.0 * mean_bytes

    raw_flows = _require(doc, "flows", "scenario", list)
    if not raw_flows:
        raise ScenarioError("flows: at least one flow is required")
    flows = []
    seen = set()
    for k, f in enumerate(raw_flows):
        where = f"flows[{k}]"
        if isinstance(f, dict) and ({"mean_packet_bytes", "mean_packet_bits", "mu"} & set(f)):
            raise ScenarioError(f"{where}: per-flow packet length is not supported; use traffic.mean_packet_bytes")
        fid = str(f.get("id", k + 1)) if isinstance(f, dict) else str(k + 1)
        if fid in seen:
            raise ScenarioError(f"{where}.id: duplicate flow id '{fid}'")
        seen.add(fid)
        src = node(f"{where}.src", _require(f, "src", where))
        dst = node(f"{where}.dst", _require(f, "dst", where))
        rate = _number(f, "rate_pps", where)
        if rate <= 0:
            raise ScenarioError(f"{where}.rate_pps: must be positive, got {rate}")
        if src == dst:
            raise ScenarioError(f"{where}: source and destination are both '{labels[src]}'")
        flows.append(Flow(fid, src, dst, rate))

    metric = str((doc.get("routing") or {}).get("metric", "hops"))
    if metric not in ROUTING_METRICS:
        raise ScenarioError(f"routing.metric: expected one of {ROUTING_METRICS}, got '{metric}'")
    sim = _sim_config(doc.get("sim"), mean_bits)

    try:
        topology = Topology(len(labels), capacity, tuple(labels))
        directory = build_routing(topology, metric)
        state = link_arrival_rates(topology, directory, flows, 1.0 / mean_bits)
    except NetworkError as exc:
        raise ScenarioError(str(exc)) from exc
    overloaded = check_stability(state)
    if overloaded:
        named = [f"{labels[u]}->{labels[v]}" for u, v in overloaded]
        raise UnstableNetworkError(named)
    return Scenario(topology, tuple(flows), mean_bits, metric, sim, directory, state, source)


def load_scenario(path) -> Scenario:
    path = FsPath(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: {exc.strerror}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}: line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    try:
        return parse_scenario(doc, str(path))
    except ScenarioError as exc:
        raise ScenarioError(f"{path}: {exc}") from exc


def scale_rates(scenario: Scenario, target_load: float) -> Scenario:
    """Rescale every flow rate so the busiest link sits at ``target_load``."""
    peak = max(scenario.state.load.values())
    if peak <= 0:
        raise ScenarioError("cannot rescale a scenario that loads no link")
    k = target_load / peak
    flows = tuple(replace(f, rate=f.rate * k) for f in scenario.flows)
    state = link_arrival_rates(scenario.topology, scenario.directory, flows, scenario.mu)
    overloaded = check_stability(state)
    if overloaded:
        raise UnstableNetworkError(overloaded)
    return replace(scenario, flows=flows, state=state)


def tandem_document(load: float, packets: int = 10**6, seed: int = 1, mode: str = "akia") -> dict:
    """Two equal links in series carrying one flow, with ``mu * c = 1``."""
    return {
        "nodes": [1, 2, 3],
        "links": [
            {"u": 1, "v": 2, "capacity_bps": 1.0},
            {"u": 2, "v": 3, "capacity_bps": 1.0},
        ],
        "flows": [{"id": "K1", "src": 1, "dst": 3, "rate_pps": load}],
        "traffic": {"mean_packet_bytes": 0.125},
        "sim": {"mode": mode, "stop": {"packets": packets}, "warmup": 0.05, "seed": seed},
    }


TANDEM_LOADS = (0.005, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.62, 0.6612, 0.7, 0.8, 0.9, 0.99)
