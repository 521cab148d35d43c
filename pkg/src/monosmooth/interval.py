"""Closed-form minimum-bending-energy solution on a single inter-knot interval.

Boundary data for one interval, after translating its left endpoint to the
origin: rise dx >= 0, end slopes vl, vr >= 0, width dt > 0.  The monotone
curve minimizing the integral of xddot^2 with these endpoint values/slopes
falls into one of two regimes:

* ``CUBIC``: the unconstrained optimum (a single cubic polynomial) is already
  nondecreasing.  This happens exactly when

      dx >= (dt/3) * (vl + vr - sqrt(vl*vr)),

  with ties resolved to CUBIC.

* ``THREE_SEGMENT``: the rise is too small for the end slopes; the optimum
  decelerates along a cubic, coasts along a flat plateau (zero second
  derivative), and accelerates along a second cubic.  With
  S = vl^(3/2) + vr^(3/2), the plateau spans [tau1, tau2],

      tau1 = 3*dx*sqrt(vl)/S,     tau2 = dt - 3*dx*sqrt(vr)/S,

  and the minimal energy is (4/(9*dx)) * S^2.

The 4/9 coefficient is pinned down by direct integration of the optimal
second derivative; the test suite re-derives it numerically.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

from .errors import InfeasibleIntervalError


class Regime(Enum):
    CUBIC = "cubic"
    THREE_SEGMENT = "three_segment"


@dataclass(frozen=True)
class IntervalParams:
    """Boundary data of one interval: rise dx, end slopes vl/vr, width dt."""

    dx: float
    vl: float
    vr: float
    dt: float

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError(f"interval width must be positive, got dt={self.dt}")
        if self.dx < 0 or self.vl < 0 or self.vr < 0:
            raise ValueError(
                f"rise and slopes must be nonnegative, got dx={self.dx}, vl={self.vl}, vr={self.vr}"
            )


@dataclass(frozen=True)
class CubicSegment:
    """Polynomial piece c0 + c1*s + c2*s^2 + c3*s^3 in s = t - t_start."""

    t_start: float
    t_end: float
    c0: float
    c1: float
    c2: float
    c3: float

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError(f"segment must have t_start < t_end, got [{self.t_start}, {self.t_end}]")


def threshold(vl: float, vr: float, dt: float) -> float:
    """Smallest rise for which the single cubic is monotone."""
    return (dt / 3.0) * (vl + vr - math.sqrt(vl * vr))


def classify(p: IntervalParams) -> Regime:
    """Pick the regime of the optimal curve; ties go to CUBIC."""
    return Regime.CUBIC if p.dx >= threshold(p.vl, p.vr, p.dt) else Regime.THREE_SEGMENT


def _plateau(p: IntervalParams) -> tuple[float, float, float, float]:
    """(tau1, tau2, plateau value, S) of the three-segment optimum."""
    s = p.vl ** 1.5 + p.vr ** 1.5
    if p.dx == 0.0:
        if s > 0.0:
            raise InfeasibleIntervalError(
                f"zero rise with positive end slopes (vl={p.vl}, vr={p.vr}): cost diverges"
            )
        return 0.0, p.dt, 0.0, 0.0
    # dx > 0 with vl = vr = 0 always classifies as CUBIC (threshold 0).
    assert s > 0.0, "three-segment curve undefined for dx > 0 with zero end slopes"
    tau1 = 3.0 * p.dx * math.sqrt(p.vl) / s
    tau2 = p.dt - 3.0 * p.dx * math.sqrt(p.vr) / s
    height = p.dx * p.vl ** 1.5 / s
    return tau1, tau2, height, s


def cost(p: IntervalParams, regime: Regime | None = None) -> float:
    """Minimal bending energy of the interval (the per-interval V).

    ``regime`` overrides classification; this is what node relaxations in the
    branch-and-bound tree use to evaluate a forced branch outside its nominal
    region.
    """
    if regime is None:
        regime = classify(p)
    if regime is Regime.CUBIC:
        dt = p.dt
        num = (p.vl**2 + p.vr**2) * dt * dt - 3.0 * p.dx * (p.vl + p.vr) * dt \
            + 3.0 * p.dx * p.dx + p.vl * p.vr * dt * dt
        return 4.0 * num / dt**3
    s = p.vl ** 1.5 + p.vr ** 1.5
    if p.dx == 0.0:
        if s > 0.0:
            raise InfeasibleIntervalError(
                f"zero rise with positive end slopes (vl={p.vl}, vr={p.vr}): cost diverges"
            )
        return 0.0
    return (4.0 / (9.0 * p.dx)) * s * s


def control(p: IntervalParams, t: float, regime: Regime | None = None) -> float:
    """Optimal second derivative u(t) at local abscissa t in [0, dt]."""
    if not 0.0 <= t <= p.dt:
        raise ValueError(f"t={t} outside [0, {p.dt}]")
    if regime is None:
        regime = classify(p)
    if regime is Regime.CUBIC:
        dt = p.dt
        slope = 6.0 * (p.vl + p.vr) / dt**2 - 12.0 * p.dx / dt**3
        intercept = 6.0 * p.dx / dt**2 - 4.0 * p.vl / dt - 2.0 * p.vr / dt
        return slope * t + intercept
    tau1, tau2, _, s = _plateau(p)
    if s == 0.0:
        return 0.0
    k = 2.0 * s * s / (9.0 * p.dx * p.dx)
    if t < tau1:
        return k * (t - tau1)
    if t <= tau2:
        return 0.0
    return k * (t - tau2)


def build_curve(p: IntervalParams, regime: Regime | None = None) -> list[CubicSegment]:
    """Optimal curve as cubic segments in local coordinates, x(0)=0, x(dt)=dx.

    CUBIC yields one segment; THREE_SEGMENT yields up to three (cubic,
    constant, cubic), dropping empty pieces when a breakpoint coincides with
    the interval boundary.  The assembled curve interpolates the endpoint
    values and slopes and is C1 across internal breakpoints.
    """
    if regime is None:
        regime = classify(p)
    dt = p.dt
    if regime is Regime.CUBIC:
        c2 = 3.0 * p.dx / dt**2 - (2.0 * p.vl + p.vr) / dt
        c3 = (p.vl + p.vr) / dt**2 - 2.0 * p.dx / dt**3
        return [CubicSegment(0.0, dt, 0.0, p.vl, c2, c3)]

    tau1, tau2, height, s = _plateau(p)
    if s == 0.0:
        return [CubicSegment(0.0, dt, 0.0, 0.0, 0.0, 0.0)]
    # Cubic coefficient of the entry/exit pieces: x = height + q*(t - tau)^3.
    q = s * s / (27.0 * p.dx * p.dx)
    segs: list[CubicSegment] = []
    if tau1 > 0.0:
        # Expand height + q*(t - tau1)^3 around t = 0.
        segs.append(
            CubicSegment(0.0, tau1, height - q * tau1**3, 3.0 * q * tau1**2, -3.0 * q * tau1, q)
        )
    if tau2 > tau1:
        segs.append(CubicSegment(tau1, tau2, height, 0.0, 0.0, 0.0))
    if tau2 < dt:
        segs.append(CubicSegment(tau2, dt, height, 0.0, 0.0, q))
    return segs
