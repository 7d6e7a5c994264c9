"""End-to-end delay approximations for a routed flow.

Both methods treat each link on the path as an isolated M/M/1 queue, which
rests on three modelling assumptions (recorded in run metadata, not checked):

* A1: the flow into each queue is Poisson;
* A2: the waiting times at different links are mutually independent;
* A3: service times and waiting times are mutually independent.

Under AKIA (a packet keeps its length) the waiting time at link ``j`` is
``C(rho_j, theta_j)`` and all transmissions together are one exponential of
rate ``mu * c_bar`` with ``1 / c_bar = sum_j 1 / c_j``, so

    Z ~ C([rho_1 .. rho_h, 1], [theta_1 .. theta_h, mu * c_bar]).

Under KIA (fresh length per hop) each link's sojourn is ``Exp(theta_j)`` and

    Z ~ C([1 .. 1], [theta_1 .. theta_h])    (hypoexponential).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .netmodel import LinkState, NetworkError, Path, UnstableNetworkError
from .phasetype import PhaseTypeParams, ph_new, ph_variance

ASSUMPTIONS = {
    "A1": "the flow into each queue of the network is Poisson",
    "A2": "queueing delays at the links of a path are mutually independent",
    "A3": "service times and queueing delays are mutually independent",
}


class Method(str, Enum):
    AKIA = "akia"
    KIA = "kia"


@dataclass(frozen=True)
class FlowApproximation:
    flow_id: str
    method: Method
    params: PhaseTypeParams
    mean: float
    jitter: float
    compound_capacity: float | None = None


def _link_rates(path: Path, state: LinkState) -> tuple[list[float], list[float]]:
    if path.hops < 1:
        raise NetworkError("empty path")
    unstable = [link for link in path.links if state.load[link] >= 1.0]
    if unstable:
        raise UnstableNetworkError(unstable)
    return [state.load[l] for l in path.links], [state.theta[l] for l in path.links]


def compound_capacity(path: Path, state: LinkState) -> float:
    """``c_bar`` with ``1 / c_bar = sum_j 1 / c_j`` along the path."""
    return 1.0 / math.fsum(1.0 / state.capacity[l] for l in path.links)


def akia_approximation(path: Path, state: LinkState, mu: float | None = None, flow_id: str = "") -> FlowApproximation:
    mu = state.mu if mu is None else mu
    rho, theta_w = _link_rates(path, state)
    c_bar = compound_capacity(path, state)
    params = ph_new(rho + [1.0], theta_w + [mu * c_bar])
    approx = FlowApproximation(
        flow_id=flow_id,
        method=Method.AKIA,
        params=params,
        mean=math.fsum(1.0 / t for t in theta_w),
        jitter=0.0,
        compound_capacity=c_bar,
    )
    return _with_jitter(approx, jitter_akia(approx))


def kia_approximation(path: Path, state: LinkState, flow_id: str = "") -> FlowApproximation:
    _, theta_w = _link_rates(path, state)
    params = ph_new([1.0] * len(theta_w), theta_w)
    approx = FlowApproximation(
        flow_id=flow_id,
        method=Method.KIA,
        params=params,
        mean=math.fsum(1.0 / t for t in theta_w),
        jitter=0.0,
    )
    return _with_jitter(approx, jitter_kia(approx))


def _with_jitter(approx: FlowApproximation, jitter: float) -> FlowApproximation:
    return FlowApproximation(
        approx.flow_id, approx.method, approx.params, approx.mean, jitter, approx.compound_capacity
    )


def jitter_akia(approx: FlowApproximation) -> float:
    return math.sqrt(ph_variance(approx.params))


def jitter_kia(approx: FlowApproximation) -> float:
    # all p = 1, so the variance reduces to sum 1 / theta^2
    return math.sqrt(ph_variance(approx.params))
