"""Finite-dimensional objective over knot values/slopes, and its gradient.

The curve-fitting problem reduces to minimizing, over knot values x_i and
knot slopes v_i,

    F(x, v) = (1/2) * sum_i V_b(x_{i+1} - x_i, v_i, v_{i+1}, dt_i)
            + (lam/2) * sum_j w_j * (x_j - alpha_j)^2

where V_b is the per-interval minimal bending energy evaluated on branch b.
An interval's branch is either chosen by classification (UNRESTRICTED) or
forced to one regime's formula, which is what branch-and-bound node
relaxations do.  Gradients are analytic; the square-root terms of the
three-segment branch have one-sided derivatives (value 0) at v = 0, reported
through a kink mask.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

from .errors import InfeasibleIntervalError
from .interval import IntervalParams, Regime, classify, threshold
from .problem import BoundaryMode, KnotVector, ProblemSpec


class RegimeFlag(Enum):
    CUBIC = "cubic"
    THREE_SEGMENT = "three_segment"
    UNRESTRICTED = "unrestricted"


@dataclass(frozen=True)
class RegimeAssignment:
    """One branch flag per inter-knot interval."""

    flags: tuple[RegimeFlag, ...]

    def __len__(self) -> int:
        return len(self.flags)

    @classmethod
    def unrestricted(cls, n_intervals: int) -> "RegimeAssignment":
        return cls((RegimeFlag.UNRESTRICTED,) * n_intervals)

    @classmethod
    def all_cubic(cls, n_intervals: int) -> "RegimeAssignment":
        return cls((RegimeFlag.CUBIC,) * n_intervals)

    @classmethod
    def forced(cls, n_intervals: int, three_segment: Iterable[int]) -> "RegimeAssignment":
        """CUBIC everywhere except the given intervals, forced THREE_SEGMENT."""
        forced = set(three_segment)
        bad = [i for i in forced if not 0 <= i < n_intervals]
        if bad:
            raise ValueError(f"forced interval indices out of range: {bad}")
        return cls(
            tuple(
                RegimeFlag.THREE_SEGMENT if i in forced else RegimeFlag.CUBIC
                for i in range(n_intervals)
            )
        )

    def forced_set(self) -> frozenset[int]:
        return frozenset(
            i for i, f in enumerate(self.flags) if f is RegimeFlag.THREE_SEGMENT
        )


@dataclass(frozen=True)
class FeasibilityReport:
    ok: bool
    violations: tuple[str, ...]

    def __bool__(self) -> bool:
        return self.ok


def _check_shapes(spec: ProblemSpec, kv: KnotVector, assign: RegimeAssignment | None) -> None:
    if kv.knots != spec.knots:
        raise ValueError("KnotVector knots do not match the problem spec's knot layout")
    if assign is not None and len(assign) != spec.n_intervals:
        raise ValueError(
            f"assignment covers {len(assign)} intervals, spec has {spec.n_intervals}"
        )


# ---------------------------------------------------------------------------
# Per-branch value and gradient on raw arrays.
# ---------------------------------------------------------------------------

def _cubic_value(dx: float, vl: float, vr: float, dt: float) -> float:
    num = (vl * vl + vr * vr) * dt * dt - 3.0 * dx * (vl + vr) * dt + 3.0 * dx * dx + vl * vr * dt * dt
    return 4.0 * num / dt**3


def _cubic_grad(dx: float, vl: float, vr: float, dt: float) -> tuple[float, float, float]:
    g_dx = -12.0 * (vl + vr) / dt**2 + 24.0 * dx / dt**3
    g_vl = (8.0 * vl + 4.0 * vr) / dt - 12.0 * dx / dt**2
    g_vr = (8.0 * vr + 4.0 * vl) / dt - 12.0 * dx / dt**2
    return g_dx, g_vl, g_vr


def _three_value(dx: float, vl: float, vr: float, strict: bool) -> float:
    s = vl**1.5 + vr**1.5
    if dx <= 0.0:
        if s == 0.0:
            return 0.0
        if strict:
            raise InfeasibleIntervalError(
                f"zero rise with positive end slopes (vl={vl}, vr={vr}): cost diverges"
            )
        return math.inf
    return (4.0 / (9.0 * dx)) * s * s


def _three_grad(dx: float, vl: float, vr: float) -> tuple[float, float, float]:
    s = vl**1.5 + vr**1.5
    if dx <= 0.0:
        if s == 0.0:
            # One-sided derivatives of the identically-zero corner.
            return 0.0, 0.0, 0.0
        raise InfeasibleIntervalError("three-segment gradient undefined at dx = 0")
    g_dx = -(4.0 / 9.0) * s * s / (dx * dx)
    g_vl = (4.0 / 3.0) * s * math.sqrt(vl) / dx
    g_vr = (4.0 / 3.0) * s * math.sqrt(vr) / dx
    return g_dx, g_vl, g_vr


def _effective_regime(dx: float, vl: float, vr: float, dt: float, flag: RegimeFlag) -> Regime:
    """Branch whose formula is in force: forced flags win, else classify."""
    if flag is RegimeFlag.CUBIC:
        return Regime.CUBIC
    if flag is RegimeFlag.UNRESTRICTED:
        return classify(IntervalParams(dx, vl, vr, dt))
    return Regime.THREE_SEGMENT


def value_arrays(
    spec: ProblemSpec,
    x: np.ndarray,
    v: np.ndarray,
    flags: Sequence[RegimeFlag],
    strict: bool = True,
) -> float:
    """Objective on raw arrays; +inf instead of raising when not strict."""
    knots, w, a = spec.knot_arrays()
    total = 0.0
    for i in range(len(knots) - 1):
        dx = x[i + 1] - x[i]
        vl, vr, dt = v[i], v[i + 1], knots[i + 1] - knots[i]
        reg = _effective_regime(dx, vl, vr, dt, flags[i])
        if reg is Regime.CUBIC:
            total += 0.5 * _cubic_value(dx, vl, vr, dt)
        else:
            val = _three_value(dx, vl, vr, strict)
            if math.isinf(val):
                return math.inf
            total += 0.5 * val
    misfit = x - a
    total += 0.5 * spec.lam * float(np.dot(w * misfit, misfit))
    return total


def gradient_arrays(
    spec: ProblemSpec,
    x: np.ndarray,
    v: np.ndarray,
    flags: Sequence[RegimeFlag],
) -> tuple[np.ndarray, np.ndarray]:
    """(gradient over [x..., v...], kink mask) on raw arrays."""
    knots, w, a = spec.knot_arrays()
    K = len(knots)
    gx = spec.lam * w * (x - a)
    gv = np.zeros(K)
    kink = np.zeros(2 * K, dtype=bool)
    for i in range(K - 1):
        dx = x[i + 1] - x[i]
        vl, vr, dt = v[i], v[i + 1], knots[i + 1] - knots[i]
        reg = _effective_regime(dx, vl, vr, dt, flags[i])
        if reg is Regime.CUBIC:
            g_dx, g_vl, g_vr = _cubic_grad(dx, vl, vr, dt)
        else:
            g_dx, g_vl, g_vr = _three_grad(dx, vl, vr)
            if vl == 0.0:
                kink[K + i] = True
            if vr == 0.0:
                kink[K + i + 1] = True
        gx[i] -= 0.5 * g_dx
        gx[i + 1] += 0.5 * g_dx
        gv[i] += 0.5 * g_vl
        gv[i + 1] += 0.5 * g_vr
    return np.concatenate([gx, gv]), kink


def effective_regimes(
    spec: ProblemSpec,
    x: np.ndarray,
    v: np.ndarray,
    flags: Sequence[RegimeFlag],
) -> list[Regime]:
    knots = np.asarray(spec.knots)
    return [
        _effective_regime(x[i + 1] - x[i], v[i], v[i + 1], knots[i + 1] - knots[i], flags[i])
        for i in range(len(knots) - 1)
    ]


# ---------------------------------------------------------------------------
# Public operations on KnotVector.
# ---------------------------------------------------------------------------

def total_objective(spec: ProblemSpec, kv: KnotVector, assign: RegimeAssignment) -> float:
    """Bending energy plus weighted data misfit for the given assignment."""
    _check_shapes(spec, kv, assign)
    _, x, v = kv.arrays()
    return value_arrays(spec, x, v, assign.flags, strict=True)


def gradient(
    spec: ProblemSpec, kv: KnotVector, assign: RegimeAssignment
) -> tuple[np.ndarray, np.ndarray]:
    """Analytic gradient over (x_0..x_K, v_0..v_K) plus a kink mask.

    Mask entries mark slope coordinates sitting exactly on the square-root
    kink of the three-segment branch (v = 0); the returned values there are
    the correct one-sided derivatives.
    """
    _check_shapes(spec, kv, assign)
    _, x, v = kv.arrays()
    return gradient_arrays(spec, x, v, assign.flags)


def feasible(spec: ProblemSpec, kv: KnotVector) -> FeasibilityReport:
    """Check the linear constraints of the finite-dimensional problem."""
    _check_shapes(spec, kv, None)
    _, x, v = kv.arrays()
    violations = []
    for i, vi in enumerate(v):
        if vi < 0:
            violations.append(f"v_{i} = {vi} < 0")
    for i in range(len(x) - 1):
        if x[i] > x[i + 1]:
            violations.append(f"x_{i} = {x[i]} > x_{i + 1} = {x[i + 1]}")
    if x[-1] > spec.x_max:
        violations.append(f"x_m = {x[-1]} > x_max = {spec.x_max}")
    if spec.boundary is BoundaryMode.PINNED_ZERO:
        if x[0] != 0.0:
            violations.append(f"x_0 = {x[0]} != 0 under pinned boundary")
    elif x[0] < 0.0:
        violations.append(f"x_0 = {x[0]} < 0 under free boundary")
    return FeasibilityReport(not violations, tuple(violations))


def monotone_certificate(
    kv: KnotVector, assign: RegimeAssignment | None = None, tol: float = 0.0
) -> bool:
    """True iff every cubic/unrestricted interval passes the regime condition.

    The condition dx_i >= (dt_i/3)(v_i + v_{i+1} - sqrt(v_i v_{i+1})) is
    exactly monotonicity of the single-cubic interpolant, so a passing
    all-cubic knot vector assembles into a globally monotone curve.
    Intervals forced to THREE_SEGMENT are exempt here; their own validity
    check (dx below the threshold) is the branch-and-bound leaf test.
    """
    knots, x, v = kv.arrays()
    flags = assign.flags if assign is not None else (RegimeFlag.UNRESTRICTED,) * (len(knots) - 1)
    for i in range(len(knots) - 1):
        if flags[i] is RegimeFlag.THREE_SEGMENT:
            continue
        dx = x[i + 1] - x[i]
        dt = knots[i + 1] - knots[i]
        if dx < threshold(v[i], v[i + 1], dt) - tol:
            return False
    return True


def certificate_violations(kv: KnotVector, skip: frozenset[int] = frozenset()) -> dict[int, float]:
    """Per-interval shortfall threshold - dx where the certificate fails."""
    knots, x, v = kv.arrays()
    out = {}
    for i in range(len(knots) - 1):
        if i in skip:
            continue
        dx = x[i + 1] - x[i]
        dt = knots[i + 1] - knots[i]
        gap = threshold(v[i], v[i + 1], dt) - dx
        if gap > 0:
            out[i] = gap
    return out


def true_objective(spec: ProblemSpec, kv: KnotVector) -> float:
    """Variational cost of the assembled curve: all intervals classified."""
    return total_objective(spec, kv, RegimeAssignment.unrestricted(spec.n_intervals))
