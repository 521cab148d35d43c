"""Convex subproblem solver for a fixed per-interval branch assignment.

Minimizes the finite-dimensional objective under the linear constraints

    v_i >= 0,   x_i <= x_{i+1},   x_m <= x_max,
    x_0 = 0 (pinned mode)  or  x_0 >= 0 (free mode)

by projected Newton: an epsilon-active set over the bound/chain constraints
selects a reduced space (tied knot values merge into blocks, bound-active
slopes drop out), a regularized Newton step is taken there, and an Armijo
backtracking search runs along the projection arc.  The projection onto the
feasible polytope is exact: pool-adjacent-violators on the knot values
followed by clipping, with slopes clamped at zero.  A projected-gradient
step is the fallback whenever the Newton step stalls, which keeps the method
globally convergent on these convex objectives.

Assignments that force intervals onto the three-segment formula have a
nonsmooth corner at (rise, end slopes) = 0, where the cost jumps to infinity
as soon as a slope lifts.  The solver dodges it by continuation: forced
intervals first keep a small minimum rise (the projection works in shifted
coordinates, so it stays exact), and the floor shrinks geometrically to zero
once the iterates settle.  A corner is never optimal when escaping it pays,
so the final floorless pass converges.

Branch-and-bound uses this solver for every node relaxation; ``fit_step1``
is the root relaxation (all intervals on the single-cubic formula, no
monotonicity condition).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .interval import Regime
from .objective import (
    RegimeAssignment,
    RegimeFlag,
    effective_regimes,
    gradient_arrays,
    value_arrays,
)
from .pava import project_monotone_box
from .problem import BoundaryMode, KnotVector, ProblemSpec

#: Default stationarity tolerance, relative to 1 + |objective|.
TOL_KKT = 1e-8
MAX_ITER = 500

_ARMIJO_SIGMA = 1e-4
_MAX_BACKTRACKS = 30


@dataclass(frozen=True)
class SubproblemResult:
    kv: KnotVector
    objective: float
    converged: bool
    iterations: int
    kkt_residual: float
    objective_history: tuple[float, ...] = ()


def _project(
    spec: ProblemSpec, x: np.ndarray, v: np.ndarray, shift: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Exact projection onto the polytope, optionally with minimum gaps.

    ``shift`` is the cumulative-minimum-gap offset; projecting x - shift onto
    the plain monotone set enforces x_{k+1} - x_k >= gap_k exactly (the shift
    is an isometry).
    """
    y = x if shift is None else x - shift
    hi = spec.x_max if shift is None else spec.x_max - shift[-1]
    if spec.boundary is BoundaryMode.PINNED_ZERO:
        tail = project_monotone_box(y[1:], lower=0.0, upper=hi)
        py = np.concatenate([[0.0], tail])
    else:
        py = project_monotone_box(y, lower=0.0, upper=hi)
    px = py if shift is None else py + shift
    return px, np.maximum(v, 0.0)


def _default_start(spec: ProblemSpec) -> tuple[np.ndarray, np.ndarray]:
    """Monotone rearrangement of a weighted least-squares line, clipped."""
    knots, w, a = spec.knot_arrays()
    mask = w > 0
    tw, aw, ww = knots[mask], a[mask], w[mask]
    if tw.size >= 2:
        A = np.stack([np.ones_like(tw), tw], axis=1)
        coef, *_ = np.linalg.lstsq(A * np.sqrt(ww)[:, None], aw * np.sqrt(ww), rcond=None)
        intercept, slope = float(coef[0]), float(coef[1])
    else:
        intercept, slope = float(aw[0]), 0.0
    x = intercept + slope * knots
    x = np.sort(x)
    np.clip(x, 0.0, spec.x_max, out=x)
    v = np.full_like(knots, max(slope, 0.0))
    return x, v


def _kkt_residual(spec: ProblemSpec, x, v, g) -> float:
    K = x.size
    px, pv = _project(spec, x - g[:K], v - g[K:])
    return float(max(np.max(np.abs(x - px)), np.max(np.abs(v - pv))))


def _hessian(spec: ProblemSpec, x: np.ndarray, v: np.ndarray, flags) -> np.ndarray:
    """Analytic Hessian of the objective over [x..., v...].

    The three-segment branch has unbounded curvature in a slope approaching
    zero; that entry is capped, which only matters when the corresponding
    bound constraint is (wrongly) inactive for an iteration.
    """
    knots, w, _ = spec.knot_arrays()
    K = len(knots)
    H = np.zeros((2 * K, 2 * K))
    H[np.arange(K), np.arange(K)] = spec.lam * w
    regs = effective_regimes(spec, x, v, flags)
    for i in range(K - 1):
        dx = x[i + 1] - x[i]
        vl, vr, dt = v[i], v[i + 1], knots[i + 1] - knots[i]
        if regs[i] is Regime.CUBIC:
            m = (4.0 / dt**3) * np.array(
                [
                    [6.0, -3.0 * dt, -3.0 * dt],
                    [-3.0 * dt, 2.0 * dt * dt, dt * dt],
                    [-3.0 * dt, dt * dt, 2.0 * dt * dt],
                ]
            )
        elif dx <= 0.0:
            # Identically-zero corner (slopes at bound); no curvature info.
            m = np.zeros((3, 3))
        else:
            s = vl**1.5 + vr**1.5
            rl = max(math.sqrt(vl), 1e-8)
            rr = max(math.sqrt(vr), 1e-8)
            m = np.array(
                [
                    [(8.0 / 9.0) * s * s / dx**3,
                     -(4.0 / 3.0) * s * math.sqrt(vl) / dx**2,
                     -(4.0 / 3.0) * s * math.sqrt(vr) / dx**2],
                    [-(4.0 / 3.0) * s * math.sqrt(vl) / dx**2,
                     (4.0 / (3.0 * dx)) * (1.5 * vl + s / (2.0 * rl)),
                     (2.0 / dx) * math.sqrt(vl * vr)],
                    [-(4.0 / 3.0) * s * math.sqrt(vr) / dx**2,
                     (2.0 / dx) * math.sqrt(vl * vr),
                     (4.0 / (3.0 * dx)) * (1.5 * vr + s / (2.0 * rr))],
                ]
            )
        # Scatter (dx, vl, vr) onto (x_i, x_{i+1}, v_i, v_{i+1}); objective has 1/2.
        idx = [i, i + 1, K + i, K + i + 1]
        J = np.array([[-1.0, 1.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0], [0.0, 0.0, 0.0, 1.0]])
        block = 0.5 * J.T @ m @ J
        for a_, ia in enumerate(idx):
            for b_, ib in enumerate(idx):
                H[ia, ib] += block[a_, b_]
    return H


def _locked_slopes(x: np.ndarray, v: np.ndarray, forced: tuple[int, ...], eps_x: float,
                   min_gap: np.ndarray) -> np.ndarray:
    """Slopes pinned by a closed forced interval (lifting them costs +inf)."""
    K = x.size
    locked = np.zeros(K, dtype=bool)
    for j in forced:
        if x[j + 1] - x[j] <= min_gap[j] + eps_x:
            locked[j] = True
            locked[j + 1] = True
    return locked & (v <= eps_x)


def _snap_residual_slopes(x: np.ndarray, v: np.ndarray, eps_v: float) -> None:
    """Zero out sub-tolerance slopes bordering an exactly closed interval.

    A zero-rise interval admits no curve unless its end slopes vanish; the
    iteration can leave slope crumbs below the stationarity tolerance there,
    which would make the assembled-curve classification blow up.
    """
    for i in range(x.size - 1):
        if x[i + 1] - x[i] == 0.0:
            if 0.0 < v[i] <= eps_v:
                v[i] = 0.0
            if 0.0 < v[i + 1] <= eps_v:
                v[i + 1] = 0.0


def _reduction(
    spec: ProblemSpec, x, v, g, eps_x: float, eps_v: float,
    min_gap: np.ndarray, locked_v: np.ndarray,
) -> np.ndarray:
    """0/1 basis of the reduced space selected by the working active set.

    Tight chain edges are kept merged unless opening them is profitable to
    first order, judged by block partial sums of the gradient (splitting a
    tight run [a, b] at edge k frees its left part to move down and its
    right part to move up).  Tight bound constraints with a favoring
    gradient drop their variable.  Returns the direction basis E; steps move
    along E's columns.
    """
    K = x.size
    gx, gv = g[:K], g[K:]
    pinned = spec.boundary is BoundaryMode.PINNED_ZERO
    tol = 1e-11 * (1.0 + float(np.max(np.abs(gx))))

    tight = np.array(
        [x[k + 1] - x[k] - min_gap[k] <= eps_x for k in range(K - 1)], dtype=bool
    )
    edge_active = np.zeros(K - 1, dtype=bool)
    k = 0
    while k < K - 1:
        if not tight[k]:
            k += 1
            continue
        a = k
        b = k + 1
        while b < K - 1 and tight[b]:
            b += 1
        # Tight run spans knots [a, b]; edges a..b-1.
        pinned_left = a == 0 and (pinned or x[0] <= eps_x)
        capped_right = b == K - 1 and spec.x_max - x[-1] <= eps_x
        run_g = gx[a:b + 1]
        prefix = np.cumsum(run_g)
        total = prefix[-1]
        for e in range(a, b):
            sum_left = prefix[e - a]
            sum_right = total - sum_left
            open_left = (not pinned_left) and sum_left > tol
            open_right = (not capped_right) and sum_right < -tol
            edge_active[e] = not (open_left or open_right)
        k = b
    block_of = np.concatenate([[0], np.cumsum(~edge_active)])

    n_blocks = block_of[-1] + 1
    fixed_block = np.zeros(n_blocks, dtype=bool)
    first_sum = float(np.sum(gx[block_of == block_of[0]]))
    last_sum = float(np.sum(gx[block_of == block_of[-1]]))
    if pinned:
        fixed_block[block_of[0]] = True
    elif x[0] <= eps_x and first_sum >= -tol:
        fixed_block[block_of[0]] = True
    if spec.x_max - x[-1] <= eps_x and last_sum <= tol and not fixed_block[block_of[-1]]:
        fixed_block[block_of[-1]] = True

    v_free = ~(((v <= eps_v) & (gv >= 0.0)) | locked_v)

    cols = []
    for b in range(n_blocks):
        if fixed_block[b]:
            continue
        col = np.zeros(2 * K)
        col[:K][block_of == b] = 1.0
        cols.append(col)
    for i in range(K):
        if v_free[i]:
            col = np.zeros(2 * K)
            col[K + i] = 1.0
            cols.append(col)
    if not cols:
        return np.zeros((2 * K, 0))
    return np.stack(cols, axis=1)


def _minimize_round(
    spec: ProblemSpec,
    flags,
    forced: tuple[int, ...],
    x: np.ndarray,
    v: np.ndarray,
    min_gap: np.ndarray,
    shift: np.ndarray | None,
    tol_kkt: float,
    max_iter: int,
    history: list[float],
) -> tuple[np.ndarray, np.ndarray, float, int]:
    """Newton/projected-gradient loop on one continuation round."""
    eps_x = 1e-9 * (1.0 + spec.x_max)
    dt_min = float(np.min(np.diff(np.asarray(spec.knots))))
    eps_v = 1e-9 * (1.0 + spec.x_max / dt_min)
    pg_step = 1.0

    def proj_residual(x_, v_, g_):
        px, pv = _project(spec, x_ - g_[:x_.size], v_ - g_[x_.size:], shift)
        return float(max(np.max(np.abs(x_ - px)), np.max(np.abs(v_ - pv))))

    F = value_arrays(spec, x, v, flags, strict=False)
    it = 0
    for it in range(1, max_iter + 1):
        g, _ = gradient_arrays(spec, x, v, flags)
        residual = proj_residual(x, v, g)
        if residual <= tol_kkt * (1.0 + abs(F)):
            break

        locked_v = _locked_slopes(x, v, forced, eps_x, min_gap)
        accepted = False
        dz = None

        E = _reduction(spec, x, v, g, eps_x, eps_v, min_gap, locked_v)
        if E.shape[1] > 0:
            Hr = E.T @ _hessian(spec, x, v, flags) @ E
            gr = E.T @ g
            mu = 1e-10 * (1.0 + np.trace(Hr) / Hr.shape[0])
            step = None
            for _ in range(12):
                try:
                    L = np.linalg.cholesky(Hr + mu * np.eye(Hr.shape[0]))
                    step = np.linalg.solve(L.T, np.linalg.solve(L, -gr))
                    break
                except np.linalg.LinAlgError:
                    mu *= 100.0
            if step is not None and np.linalg.norm(step) > 0:
                dz = E @ step
                alpha = 1.0
                for _ in range(_MAX_BACKTRACKS):
                    xn, vn = _project(spec, x + alpha * dz[:x.size], v + alpha * dz[x.size:], shift)
                    Fn = value_arrays(spec, xn, vn, flags, strict=False)
                    pred = float(g @ np.concatenate([xn - x, vn - v]))
                    if Fn <= F + _ARMIJO_SIGMA * pred and pred < 0:
                        x, v, F = xn, vn, Fn
                        accepted = True
                        break
                    alpha *= 0.5

        if not accepted:
            gm = g.copy()
            gm[x.size:][locked_v] = 0.0
            beta = pg_step
            for _ in range(60):
                xn, vn = _project(spec, x - beta * gm[:x.size], v - beta * gm[x.size:], shift)
                Fn = value_arrays(spec, xn, vn, flags, strict=False)
                pred = float(g @ np.concatenate([xn - x, vn - v]))
                if Fn <= F + _ARMIJO_SIGMA * pred and pred < 0:
                    x, v, F = xn, vn, Fn
                    accepted = True
                    pg_step = beta * 2.0
                    break
                beta *= 0.25

        if not accepted and dz is not None:
            # End-game polish: near the optimum, objective differences fall
            # below float resolution before the stationarity residual does.
            # Accept a full Newton step on residual decrease alone, provided
            # it does not measurably increase the objective.
            xn, vn = _project(spec, x + dz[:x.size], v + dz[x.size:], shift)
            Fn = value_arrays(spec, xn, vn, flags, strict=False)
            if Fn <= F + 1e-12 * (1.0 + abs(F)):
                gn, _ = gradient_arrays(spec, xn, vn, flags)
                if proj_residual(xn, vn, gn) < 0.9 * residual:
                    x, v, F = xn, vn, Fn
                    accepted = True

        if not accepted:
            break  # no acceptable step at this round's resolution

        history.append(F)

    return x, v, F, it


def solve_node(
    spec: ProblemSpec,
    assign: RegimeAssignment,
    warm_start: KnotVector | None = None,
    *,
    tol_kkt: float = TOL_KKT,
    max_iter: int = MAX_ITER,
) -> SubproblemResult:
    """First-order stationary point of the assigned objective, deterministic.

    Runs the projected-Newton loop over a shrinking minimum-rise floor on the
    forced intervals (continuation past the dx = 0 corner), then certifies on
    the true feasible set.  Non-convergence after the iteration budget
    returns the best iterate with ``converged=False``.
    """
    if len(assign) != spec.n_intervals:
        raise ValueError("assignment length does not match the problem spec")
    knots = np.asarray(spec.knots)
    flags = assign.flags
    forced = tuple(i for i, f in enumerate(flags) if f is RegimeFlag.THREE_SEGMENT)

    if warm_start is not None:
        _, x, v = warm_start.arrays()
        x, v = x.copy(), v.copy()
    else:
        x, v = _default_start(spec)

    n_int = spec.n_intervals
    gap0 = min(1e-3 * spec.x_max, spec.x_max / (8.0 * max(1, len(forced))))
    floors = [gap0 * 10.0**-k for k in (0, 3, 6, 9)] if forced else []
    floors.append(0.0)

    eps_x = 1e-9 * (1.0 + spec.x_max)
    history: list[float] = []
    total_it = 0
    warm_F = None
    for floor in floors:
        min_gap = np.zeros(n_int)
        if forced:
            min_gap[list(forced)] = floor
        shift = np.concatenate([[0.0], np.cumsum(min_gap)]) if floor > 0 else None
        x, v = _project(spec, x, v, shift)
        if warm_F is None:
            warm_F = value_arrays(spec, x, v, flags, strict=False)
            history.append(warm_F)
        # Floored rounds only steer past the corner; the floorless round
        # does the certified polish with the full budget.
        round_budget = min(max_iter, 60) if floor > 0.0 else max_iter
        x, v, F, it = _minimize_round(
            spec, flags, forced, x, v, min_gap, shift, tol_kkt, round_budget, history
        )
        total_it += it
        if floor > 0.0 and all(x[j + 1] - x[j] > floor + eps_x for j in forced):
            # No forced rise sits on the floor: the floor is not binding and
            # the remaining rounds would reproduce this point.  Certify at 0.
            min_gap[:] = 0.0
            x, v, F, it = _minimize_round(
                spec, flags, forced, x, v, min_gap, None, tol_kkt, max_iter, history
            )
            total_it += it
            break

    dt_min = float(np.min(np.diff(knots)))
    _snap_residual_slopes(x, v, 1e-8 * (1.0 + spec.x_max / dt_min))
    F = value_arrays(spec, x, v, flags, strict=False)
    kv = KnotVector.from_arrays(knots, x, v)
    g, _ = gradient_arrays(spec, x, v, flags)
    residual = _kkt_residual(spec, x, v, g)
    converged = residual <= tol_kkt * (1.0 + abs(F))
    return SubproblemResult(
        kv=kv,
        objective=F,
        converged=converged,
        iterations=total_it,
        kkt_residual=residual,
        objective_history=tuple(history),
    )


def recompute_kkt_residual(spec: ProblemSpec, assign: RegimeAssignment, kv: KnotVector) -> float:
    """Stationarity residual of a knot vector, from scratch (for audits)."""
    _, x, v = kv.arrays()
    g, _ = gradient_arrays(spec, x, v, assign.flags)
    return _kkt_residual(spec, x, v, g)


def fit_step1(spec: ProblemSpec, **kwargs) -> SubproblemResult:
    """Root relaxation: all intervals on the single-cubic formula.

    Keeps the boundary pin, the ordering constraints, the bound x_m <= x_max
    and v >= 0, but not the per-interval monotonicity condition.  Its
    objective is a global lower bound; if its solution passes the
    monotonicity certificate it is the optimal curve outright.
    """
    return solve_node(spec, RegimeAssignment.all_cubic(spec.n_intervals), None, **kwargs)
