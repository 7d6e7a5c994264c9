"""Approximation-versus-simulation comparison.

Jitter is the sample standard deviation (``n - 1`` divisor).  The NLL treats
the atom at zero separately from the continuous density: positive samples
contribute ``-log f(z)``, exact zeros contribute ``-log Q``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .phasetype import PhaseTypeParams, ph_logpdf

log = logging.getLogger(__name__)


class Region(str, Enum):
    HIGH = "high"
    LOW = "low"


class DensityMismatchWarning(UserWarning):
    """Raised as a warning when a model density is not positive at observed data."""


@dataclass(frozen=True)
class FlowReport:
    flow_id: str
    hops: int
    sim_mean: float
    sim_jitter: float
    akia_mean: float
    akia_jitter: float
    kia_mean: float
    kia_jitter: float
    eps_akia: float
    eps_kia: float
    nll_akia: float
    nll_kia: float
    n_samples: int
    load: float = float("nan")  # largest link load on the path

    @property
    def delta_nll(self) -> float:
        return self.nll_kia - self.nll_akia

    @property
    def one_hop(self) -> bool:
        # both methods give the same distribution on a single link
        return self.hops == 1

    @property
    def region(self) -> Region | None:
        if self.one_hop:
            return None
        return Region.HIGH if self.eps_akia < self.eps_kia else Region.LOW


@dataclass(frozen=True)
class RegionSummary:
    n_high: int
    n_low: int
    n_skipped: int
    eps_akia_range: tuple[float, float]
    eps_kia_range: tuple[float, float]
    n_delta_positive: int
    tip_load: float | None

    @property
    def high_fraction(self) -> float:
        total = self.n_high + self.n_low
        return self.n_high / total if total else float("nan")


def relative_error(approx_jitter: float, sim_jitter: float) -> float:
    if sim_jitter == 0:
        raise ZeroDivisionError("simulated jitter is zero")
    return abs(approx_jitter - sim_jitter) / abs(sim_jitter)


def sample_jitter(samples) -> float:
    return float(np.std(np.asarray(samples, dtype=float), ddof=1))


def nll(params: PhaseTypeParams, samples) -> float:
    """Negative log-likelihood of delay samples under ``C(p, theta)``.

    Returns ``inf`` when a sample lies where the model puts no mass (a zero
    sample with ``Q = 0``, or a non-positive density).
    """
    z = np.asarray(samples, dtype=float)
    if z.size == 0:
        raise ValueError("no samples")
    if np.any(z < 0):
        raise ValueError("delay samples must be non-negative")
    zero = z == 0.0
    n_zero = int(zero.sum())
    total = 0.0
    if n_zero:
        q = params.atom
        if q == 0.0:
            return math.inf
        total -= n_zero * math.log(q)
    pos = z[~zero]
    if pos.size:
        lp = ph_logpdf(params, pos)
        if np.any(np.isnan(lp)):
            warnings.warn(
                f"model density is not positive at {int(np.isnan(lp).sum())} sample(s)",
                DensityMismatchWarning,
                stacklevel=2,
            )
            return math.inf
        total -= math.fsum(lp)
    return total


class EmpiricalCCDF:
    """``t -> #(samples > t) / n``; right-continuous step function."""

    def __init__(self, samples):
        z = np.sort(np.asarray(samples, dtype=float))
        if z.size == 0:
            raise ValueError("no samples")
        self.sorted = z

    def __call__(self, t):
        n = self.sorted.size
        above = n - np.searchsorted(self.sorted, t, side="right")
        out = above / n
        return float(out) if np.ndim(out) == 0 else out


def empirical_ccdf(samples) -> EmpiricalCCDF:
    return EmpiricalCCDF(samples)


def crossing_load(loads, eps_akia, eps_kia) -> float | None:
    """First load where ``eps_akia - eps_kia`` turns from negative to non-negative.

    Linear interpolation between the bracketing grid points.
    """
    order = np.argsort(loads)
    x = np.asarray(loads, dtype=float)[order]
    d = (np.asarray(eps_akia, dtype=float) - np.asarray(eps_kia, dtype=float))[order]
    for i in range(len(x) - 1):
        if d[i] < 0 <= d[i + 1]:
            return float(x[i] + (x[i + 1] - x[i]) * (-d[i]) / (d[i + 1] - d[i]))
    return None


def region_classify(reports) -> RegionSummary:
    reports = list(reports)
    if not reports:
        raise ValueError("no reports")
    multi = [r for r in reports if not r.one_hop]
    high = sum(r.region is Region.HIGH for r in multi)

    def span(vals):
        vals = list(vals)
        return (min(vals), max(vals)) if vals else (float("nan"), float("nan"))

    tip = None
    loads = [r.load for r in multi]
    if len(multi) >= 2 and all(math.isfinite(v) for v in loads) and len(set(loads)) == len(loads):
        tip = crossing_load(loads, [r.eps_akia for r in multi], [r.eps_kia for r in multi])
    return RegionSummary(
        n_high=high,
        n_low=len(multi) - high,
        n_skipped=len(reports) - len(multi),
        eps_akia_range=span(r.eps_akia for r in multi),
        eps_kia_range=span(r.eps_kia for r in multi),
        n_delta_positive=sum(r.delta_nll > 0 for r in multi),
        tip_load=tip,
    )


def flow_report(flow_id: str, hops: int, samples, akia, kia, load: float = float("nan")) -> FlowReport:
    """Compare both approximations of one flow with its simulated delays."""
    z = np.asarray(samples, dtype=float)
    sim_jitter = sample_jitter(z)
    return FlowReport(
        flow_id=flow_id,
        hops=hops,
        sim_mean=float(z.mean()),
        sim_jitter=sim_jitter,
        akia_mean=akia.mean,
        akia_jitter=akia.jitter,
        kia_mean=kia.mean,
        kia_jitter=kia.jitter,
        eps_akia=relative_error(akia.jitter, sim_jitter),
        eps_kia=relative_error(kia.jitter, sim_jitter),
        nll_akia=nll(akia.params, z),
        nll_kia=nll(kia.params, z),
        n_samples=int(z.size),
        load=load,
    )
