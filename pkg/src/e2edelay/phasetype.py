"""The C(p, theta) family of acyclic phase-type distributions.

A variable ``Z ~ C(p, theta)`` is the sum ``sum_f X_f * Y_f`` of independent
products, with ``X_f ~ Bernoulli(p_f)`` and ``Y_f ~ Exp(theta_f)``.  With
pairwise-distinct rates it has the closed forms

    S(t) = sum_f (1 / P_f) exp(-theta_f t)
    f(t) = sum_f (theta_f / P_f) exp(-theta_f t)     (t > 0)
    1 / P_f = p_f prod_{g != f} (1 + p_g theta_f / (theta_g - theta_f))

plus a point mass ``Q = prod_f (1 - p_f)`` at zero.

Equal rates make the coefficients blow up.  They are separated at
construction by a tiny deterministic relative perturbation; the moments are
still computed from the original rates because their closed forms do not care
about ties.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from enum import Enum
from typing import NamedTuple

import mpmath
import numpy as np

log = logging.getLogger(__name__)

COLLISION_RTOL = 1e-9
PERTURB_EPS = 1e-6

# longdouble evaluations whose estimated relative error exceeds this are redone
# in arbitrary precision
_REFINE_RTOL = 1e-6
_LD_EPS = float(np.finfo(np.longdouble).eps)


class PhaseTypeError(ValueError):
    pass


class Classification(str, Enum):
    DEGENERATE = "degenerate"
    EXPONENTIAL = "exponential"
    HYPOEXPONENTIAL = "hypoexponential"
    ERLANG = "erlang"
    GENERAL = "general"


@dataclass(frozen=True)
class PhaseTypeParams:
    """Validated ``(p, theta)`` pair.

    ``theta`` holds the evaluation rates (pairwise distinct after the
    collision perturbation); ``theta_raw`` keeps the rates as given.
    """

    p: tuple[float, ...]
    theta: tuple[float, ...]
    theta_raw: tuple[float, ...]

    @property
    def h(self) -> int:
        return len(self.p)

    @property
    def atom(self) -> float:
        return math.prod(1.0 - pf for pf in self.p)


@dataclass(frozen=True)
class PhaseTypeSummary:
    mean: float
    variance: float
    atom_at_zero: float
    classification: Classification


class Density(NamedTuple):
    """Continuous density value(s) and the separate Dirac mass at ``t = 0``."""

    continuous: float | np.ndarray
    atom: float


def _separate_rates(theta: list[float]) -> list[float]:
    out: list[float] = []
    for f, rate in enumerate(theta):
        k = sum(
            1 for g in range(f) if abs(theta[g] - rate) <= COLLISION_RTOL * max(theta[g], rate)
        )
        new = rate
        while k > 0:
            new = rate * (1.0 + k * PERTURB_EPS)
            if all(abs(o - new) > COLLISION_RTOL * max(o, new) for o in out):
                break
            k += 1
        out.append(new)
    return out


def ph_new(p, theta) -> PhaseTypeParams:
    """Validate ``(p, theta)`` and separate colliding rates.

    A rate within relative distance 1e-9 of an earlier one is scaled by
    ``1 + k * 1e-6`` where ``k`` counts the earlier colliding rates (bumped
    further if that still lands on an existing rate).  Order is preserved.
    """
    p = [float(x) for x in p]
    theta = [float(x) for x in theta]
    if not p or len(p) != len(theta):
        raise PhaseTypeError(
            f"p and theta must be non-empty and of equal length, got {len(p)} and {len(theta)}"
        )
    for f, pf in enumerate(p):
        if not 0.0 <= pf <= 1.0:
            raise PhaseTypeError(f"p[{f}] = {pf} is outside [0, 1]")
    for f, tf in enumerate(theta):
        if not (tf > 0.0 and math.isfinite(tf)):
            raise PhaseTypeError(f"theta[{f}] = {tf} must be a positive finite rate")
    return PhaseTypeParams(tuple(p), tuple(_separate_rates(theta)), tuple(theta))


def inverse_p_coefficients(params: PhaseTypeParams, dtype=np.longdouble) -> np.ndarray:
    """The ``1 / P_f`` coefficients, evaluated in ``dtype``."""
    p = np.asarray(params.p, dtype=dtype)
    th = np.asarray(params.theta, dtype=dtype)
    coef = p.copy()
    for f in range(params.h):
        for g in range(params.h):
            if g != f:
                coef[f] *= 1 + p[g] * th[f] / (th[g] - th[f])
    return coef


def _as_times(t) -> np.ndarray:
    arr = np.asarray(t, dtype=float)
    if np.any(np.isnan(arr)) or np.any(arr < 0):
        raise PhaseTypeError("t must be non-negative")
    return arr


def _mp_coefficients(params: PhaseTypeParams, weights: str):
    with mpmath.workdps(60):
        p = [mpmath.mpf(x) for x in params.p]
        th = [mpmath.mpf(x) for x in params.theta]
        out = []
        for f in range(params.h):
            c = p[f]
            for g in range(params.h):
                if g != f:
                    c *= 1 + p[g] * th[f] / (th[g] - th[f])
            out.append(c * th[f] if weights == "pdf" else c)
        return out, th


def _shifted_sum(params: PhaseTypeParams, t: np.ndarray, weights: str) -> tuple[np.ndarray, float]:
    """Return ``(s, shift)`` with ``sum_f w_f exp(-theta_f t) = s * exp(-shift t)``.

    Factoring out the slowest rate keeps every exponential in ``(0, 1]`` so
    nothing underflows in the tail.  Terms are accumulated in longdouble;
    points whose cancellation error could exceed ~1e-6 relative are redone
    with mpmath.
    """
    coef = inverse_p_coefficients(params)
    th = np.asarray(params.theta, dtype=np.longdouble)
    if weights == "pdf":
        coef = coef * th
    shift = float(min(params.theta))
    tt = t.astype(np.longdouble).reshape(-1)
    terms = coef[None, :] * np.exp(-(th[None, :] - np.longdouble(shift)) * tt[:, None])
    s = terms.sum(axis=1)
    mag = np.abs(terms).sum(axis=1)
    bad = mag * _LD_EPS > _REFINE_RTOL * np.abs(s)
    bad &= mag > 0
    if np.any(bad):
        mp_coef, mp_th = _mp_coefficients(params, weights)
        with mpmath.workdps(60):
            mshift = mpmath.mpf(shift)
            for i in np.flatnonzero(bad):
                ti = mpmath.mpf(float(tt[i]))
                s[i] = np.longdouble(
                    float(sum(c * mpmath.exp(-(r - mshift) * ti) for c, r in zip(mp_coef, mp_th)))
                )
    return s.astype(float).reshape(t.shape), shift


def ph_pdf(params: PhaseTypeParams, t) -> Density:
    """Continuous density at ``t`` (scalar or array) and the atom ``Q`` at zero."""
    tt = _as_times(t)
    s, shift = _shifted_sum(params, tt, "pdf")
    val = s * np.exp(-shift * tt)
    if np.ndim(val) == 0:
        val = float(val)
    return Density(val, params.atom)


def ph_logpdf(params: PhaseTypeParams, t) -> np.ndarray:
    """Log of the continuous density; ``nan`` where the evaluated sum is not positive."""
    tt = _as_times(t)
    s, shift = _shifted_sum(params, tt, "pdf")
    with np.errstate(invalid="ignore", divide="ignore"):
        out = np.where(s > 0, np.log(np.where(s > 0, s, 1.0)) - shift * tt, np.nan)
    return out


def ph_ccdf(params: PhaseTypeParams, t):
    """P(Z > t)."""
    tt = _as_times(t)
    s, shift = _shifted_sum(params, tt, "ccdf")
    val = np.clip(s * np.exp(-shift * tt), 0.0, 1.0)
    if np.ndim(val) == 0:
        return float(val)
    return val


def ph_mean(params: PhaseTypeParams) -> float:
    return math.fsum(pf / tf for pf, tf in zip(params.p, params.theta_raw))


def ph_variance(params: PhaseTypeParams) -> float:
    return math.fsum(
        2.0 * pf / tf**2 - (pf / tf) ** 2 for pf, tf in zip(params.p, params.theta_raw)
    )


def ph_sample(params: PhaseTypeParams, rng: np.random.Generator, size=None):
    """Draw ``sum_f X_f Y_f`` by inverse transform.

    Uses the rates as given (not the perturbed ones).  ``size=None`` returns a
    single float.
    """
    n = 1 if size is None else int(np.prod(size))
    h = params.h
    u_bern = rng.random((n, h))
    u_exp = rng.random((n, h))
    p = np.asarray(params.p)
    th = np.asarray(params.theta_raw)
    y = -np.log1p(-u_exp) / th
    z = np.where(u_bern < p, y, 0.0).sum(axis=1)
    if size is None:
        return float(z[0])
    return z.reshape(size)


def ph_classify(params: PhaseTypeParams) -> Classification:
    p, th = params.p, params.theta_raw
    if params.h == 1:
        if p[0] == 0.0:
            return Classification.DEGENERATE
        if p[0] == 1.0:
            return Classification.EXPONENTIAL
        return Classification.GENERAL
    if all(pf == 1.0 for pf in p):
        if all(t == th[0] for t in th):
            return Classification.ERLANG
        if len(set(th)) == len(th):
            return Classification.HYPOEXPONENTIAL
    return Classification.GENERAL


def ph_summary(params: PhaseTypeParams) -> PhaseTypeSummary:
    return PhaseTypeSummary(
        mean=ph_mean(params),
        variance=ph_variance(params),
        atom_at_zero=params.atom,
        classification=ph_classify(params),
    )


def ph_collapse(a: PhaseTypeParams, b: PhaseTypeParams, rtol: float = 1e-9) -> PhaseTypeParams | None:
    """Fold two single-phase variables into one when their sum stays single-phase.

    When ``theta_b - theta_a == p_a * theta_b`` the second exponential term of
    the ccdf of ``a + b`` vanishes and the sum is ``C(p, theta_a)`` with
    ``p = (d p_a + p_a p_b theta_a) / d``, ``d = theta_b - theta_a``.
    Returns ``None`` when the condition does not hold.
    """
    if a.h != 1 or b.h != 1:
        raise PhaseTypeError("collapse needs two single-phase parameter sets")
    (pa,), (ta,) = a.p, a.theta_raw
    (pb,), (tb,) = b.p, b.theta_raw
    delta = tb - ta
    if delta == 0.0 or abs(delta - pa * tb) > rtol * max(abs(delta), pa * tb, 1e-300):
        return None
    p = (delta * pa + pa * pb * ta) / delta
    return ph_new([min(max(p, 0.0), 1.0)], [ta])
