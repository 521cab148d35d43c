"""Branch-and-bound search over per-interval regime assignments.

The fitting problem is convex but its objective switches formulas per
interval, so the search enumerates which intervals use the three-segment
branch.  A node fixes a set S of intervals to that branch (all others on the
single-cubic formula, with no monotonicity condition) and solves the smooth
convex relaxation; its optimum lower-bounds every curve whose intervals in S
are genuinely in the three-segment regime.  A node solution is leaf-feasible
when all non-forced intervals pass the monotonicity certificate and all
forced intervals sit below their regime threshold; the relaxation value then
equals the true cost of a feasible monotone curve and closes the branch.

Search order is breadth-first; children add one forced interval each and are
deduplicated by their forced set, so at most 2^(#intervals) subproblems
exist.  Every node solution is additionally scored with the true
(classification-based) objective, which is a valid upper bound whenever
finite, so incumbents appear early and pruning bites.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .interval import IntervalParams, build_curve, threshold
from .objective import (
    RegimeAssignment,
    RegimeFlag,
    certificate_violations,
    feasible,
    value_arrays,
)
from .pava import project_monotone_box
from .problem import BoundaryMode, KnotVector, ProblemSpec, validate
from .spline import SplineCurve, c1_defect
from .subproblem import SubproblemResult, solve_node
from .errors import ValidationError

log = logging.getLogger("monosmooth.bnb")


class SolveStatus:
    OPTIMAL_AT_ROOT = "OptimalAtRoot"
    OPTIMAL = "Optimal"
    ITERATION_LIMIT = "IterationLimit"


@dataclass(frozen=True)
class BnBConfig:
    max_nodes: int = 100_000
    tol_gap: float = 1e-6
    threads: int = 1
    node_order: str = "breadth-first"  # or "depth-first"
    pruning: bool = True


@dataclass
class BnBNode:
    node_id: int
    assign: frozenset[int]
    lower_bound: float
    result: SubproblemResult | None
    depth: int
    parent_id: int | None


@dataclass(frozen=True)
class SolveReport:
    status: str
    objective: float
    kv: KnotVector
    nodes_explored: int
    nodes_pruned: int
    tree_depth: int
    gap: float
    root_objective: float
    nodes: tuple[BnBNode, ...] = ()


def _leaf_feasible(spec: ProblemSpec, kv: KnotVector, forced: frozenset[int], tol: float) -> bool:
    knots, x, v = kv.arrays()
    for i in range(len(knots) - 1):
        dx = x[i + 1] - x[i]
        th = threshold(v[i], v[i + 1], knots[i + 1] - knots[i])
        if i in forced:
            if dx > th + tol:
                return False
        elif dx < th - tol:
            return False
    return True


def _true_objective_or_inf(spec: ProblemSpec, kv: KnotVector) -> float:
    _, x, v = kv.arrays()
    flags = (RegimeFlag.UNRESTRICTED,) * spec.n_intervals
    return value_arrays(spec, x, v, flags, strict=False)


def _fallback_incumbent(spec: ProblemSpec) -> KnotVector:
    """Feasible knot vector with finite true cost: projected targets, zero slopes."""
    knots, w, a = spec.knot_arrays()
    x = a.copy()
    if spec.boundary is BoundaryMode.PINNED_ZERO:
        x[0] = 0.0
        x = np.concatenate([[0.0], project_monotone_box(x[1:], 0.0, spec.x_max)])
    else:
        x = project_monotone_box(x, 0.0, spec.x_max)
    return KnotVector.from_arrays(knots, x, np.zeros_like(x))


def assemble(spec: ProblemSpec, kv: KnotVector) -> SplineCurve:
    """Concatenate per-interval optimal curves into one piecewise cubic.

    Requires a feasible knot vector; the result interpolates every
    (knot, value, slope) triple and is C1 across all breakpoints, which
    include the knots plus any three-segment plateau boundaries.
    """
    report = feasible(spec, kv)
    if not report:
        raise ValidationError("infeasible knot vector: " + "; ".join(report.violations))
    knots, x, v = kv.arrays()
    breakpoints = [float(knots[0])]
    segments = []
    for i in range(len(knots) - 1):
        p = IntervalParams(x[i + 1] - x[i], v[i], v[i + 1], knots[i + 1] - knots[i])
        for seg in build_curve(p):
            g0, g1 = knots[i] + seg.t_start, knots[i] + seg.t_end
            segments.append(
                type(seg)(g0, g1, seg.c0 + x[i], seg.c1, seg.c2, seg.c3)
            )
            breakpoints.append(float(g1))
    curve = SplineCurve(tuple(breakpoints), tuple(segments))
    dval, dder = c1_defect(curve)
    scale = 1.0 + spec.x_max
    if dval > 1e-9 * scale or dder > 1e-9 * scale * 10:
        raise AssertionError(f"assembled curve not C1: value defect {dval}, slope defect {dder}")
    return curve


def solve(spec: ProblemSpec, config: BnBConfig | None = None) -> tuple[SolveReport, SplineCurve]:
    """Minimize the fitting problem to within ``config.tol_gap``.

    Returns the solve report and the assembled optimal curve.  Exploration
    stops early with status ``IterationLimit`` after ``config.max_nodes``
    solved nodes; the best incumbent found so far is returned.
    """
    spec = validate(spec)
    cfg = config or BnBConfig()
    n_int = spec.n_intervals
    leaf_tol = 1e-9 * (1.0 + spec.x_max)

    incumbent_kv = _fallback_incumbent(spec)
    incumbent_obj = _true_objective_or_inf(spec, incumbent_kv)

    root_res = solve_node(spec, RegimeAssignment.all_cubic(n_int))
    root_lb = root_res.objective if root_res.converged else -math.inf
    root = BnBNode(0, frozenset(), root_lb, root_res, 0, None)
    all_nodes = [root]
    nodes_explored = 1
    nodes_pruned = 0
    tree_depth = 0

    root_true = _true_objective_or_inf(spec, root_res.kv)
    if root_true < incumbent_obj:
        incumbent_obj, incumbent_kv = root_true, root_res.kv

    if _leaf_feasible(spec, root_res.kv, frozenset(), leaf_tol):
        log.info("root relaxation is monotone; optimal at root")
        report = SolveReport(
            status=SolveStatus.OPTIMAL_AT_ROOT,
            objective=root_res.objective,
            kv=root_res.kv,
            nodes_explored=1,
            nodes_pruned=0,
            tree_depth=0,
            gap=0.0,
            root_objective=root_res.objective,
            nodes=(root,),
        )
        return report, assemble(spec, root_res.kv)

    # Frontier entries: (forced set, parent lower bound, parent kv, depth, parent id).
    seen: set[frozenset[int]] = {frozenset()}
    queue: deque = deque()

    def push_children(node: BnBNode) -> None:
        violations = certificate_violations(node.result.kv, skip=node.assign)
        order = sorted(
            (i for i in range(n_int) if i not in node.assign),
            key=lambda i: (-violations.get(i, 0.0), i),
        )
        for i in order:
            child_set = node.assign | {i}
            if child_set in seen:
                continue
            seen.add(child_set)
            queue.append((child_set, node.lower_bound, node.result.kv, node.depth + 1, node.node_id))

    push_children(root)
    next_id = 1
    status = SolveStatus.OPTIMAL
    min_open_lb = math.inf

    def solve_entry(entry):
        child_set, parent_lb, warm, depth, parent_id = entry
        res = solve_node(spec, RegimeAssignment.forced(n_int, child_set), warm_start=warm)
        return entry, res

    pool = ThreadPoolExecutor(max_workers=cfg.threads) if cfg.threads > 1 else None
    try:
        while queue:
            if nodes_explored >= cfg.max_nodes:
                status = SolveStatus.ITERATION_LIMIT
                min_open_lb = min((e[1] for e in queue), default=math.inf)
                break

            batch = []
            batch_cap = cfg.threads if cfg.threads > 1 else 1
            while queue and len(batch) < batch_cap:
                entry = queue.popleft() if cfg.node_order == "breadth-first" else queue.pop()
                if cfg.pruning and entry[1] >= incumbent_obj - cfg.tol_gap:
                    nodes_pruned += 1
                    continue
                batch.append(entry)
            if not batch:
                continue

            solved = list(pool.map(solve_entry, batch)) if pool else [solve_entry(b) for b in batch]

            for entry, res in solved:
                child_set, parent_lb, _, depth, parent_id = entry
                nodes_explored += 1
                tree_depth = max(tree_depth, depth)
                # Both the parent's bound and the node relaxation are valid
                # lower bounds for this subtree's region; take the tighter.
                # (A forced formula evaluated outside its own region can dip
                # below the parent's relaxation, and a non-converged value
                # certifies nothing.)
                lb = max(parent_lb, res.objective) if res.converged else parent_lb
                node = BnBNode(next_id, child_set, lb, res, depth, parent_id)
                all_nodes.append(node)
                next_id += 1

                true_obj = _true_objective_or_inf(spec, res.kv)
                if true_obj < incumbent_obj:
                    incumbent_obj, incumbent_kv = true_obj, res.kv

                if _leaf_feasible(spec, res.kv, child_set, leaf_tol):
                    if res.objective < incumbent_obj:
                        incumbent_obj, incumbent_kv = res.objective, res.kv
                    continue  # branch solved exactly; no children needed
                if cfg.pruning and lb >= incumbent_obj - cfg.tol_gap:
                    continue
                if len(child_set) < n_int:
                    push_children(node)
    finally:
        if pool:
            pool.shutdown()

    gap = max(0.0, incumbent_obj - min_open_lb) if status == SolveStatus.ITERATION_LIMIT else 0.0
    log.info(
        "solve done: status=%s objective=%.6g explored=%d pruned=%d depth=%d",
        status, incumbent_obj, nodes_explored, nodes_pruned, tree_depth,
    )
    report = SolveReport(
        status=status,
        objective=incumbent_obj,
        kv=incumbent_kv,
        nodes_explored=nodes_explored,
        nodes_pruned=nodes_pruned,
        tree_depth=tree_depth,
        gap=gap,
        root_objective=root_res.objective,
        nodes=tuple(all_nodes),
    )
    return report, assemble(spec, incumbent_kv)
