"""Shared helpers: random instances and the numerical-integration oracle."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.integrate import quad

from monosmooth.interval import IntervalParams, Regime, classify, control, _plateau
from monosmooth.problem import BoundaryMode, DataPoint, ProblemSpec, validate


def integrate_control_squared(p: IntervalParams) -> float:
    """Adaptive quadrature of u(t)^2, split at the plateau breakpoints.

    Independent oracle for the interval cost: it never looks at the cost
    formula, only at the pointwise optimal control.
    """
    if classify(p) is Regime.CUBIC:
        pieces = [(0.0, p.dt)]
        regime = Regime.CUBIC
    else:
        tau1, tau2, _, _ = _plateau(p)
        pieces = [(0.0, tau1), (tau1, tau2), (tau2, p.dt)]
        regime = Regime.THREE_SEGMENT
    total = 0.0
    for a, b in pieces:
        if b - a <= 0:
            continue
        val, _ = quad(lambda t: control(p, t, regime) ** 2, a, b, limit=200)
        total += val
    return total


def random_params(rng: np.random.Generator) -> IntervalParams:
    """Log-uniform interval boundary data covering both regimes."""
    dx = 10.0 ** rng.uniform(-2.0, 1.0)
    vl = 10.0 ** rng.uniform(-2.0, 1.0)
    vr = 10.0 ** rng.uniform(-2.0, 1.0)
    dt = 10.0 ** rng.uniform(-1.0, 1.0)
    if rng.random() < 0.15:
        vl = 0.0
    if rng.random() < 0.15:
        vr = 0.0
    return IntervalParams(dx, vl, vr, dt)


def random_instance(
    rng: np.random.Generator,
    *,
    n_data: int | None = None,
    grid_n: int | None = None,
    monotone: str = "mixed",
    lam: float | None = None,
    bound_slack: float = 1.15,
    boundary: BoundaryMode = BoundaryMode.PINNED_ZERO,
) -> ProblemSpec:
    """Random fitting instance; with ``grid_n`` all sites land on that grid.

    monotone: "mixed" draws a random walk with occasional decreases,
    "increasing" draws well-separated increasing targets.
    """
    m = n_data if n_data is not None else int(rng.integers(2, 7))
    T = float(rng.choice([1.0, 2.0, 4.0]))
    if grid_n is not None:
        steps = grid_n - 1
        lo = int(0.08 * steps)
        idx = np.sort(rng.choice(np.arange(lo, steps + 1), size=m, replace=False))
        while np.any(np.diff(idx) < steps // (4 * m)) or (len(idx) > 1 and idx[0] < lo):
            idx = np.sort(rng.choice(np.arange(lo, steps + 1), size=m, replace=False))
        idx[-1] = steps
        h = T / steps
        ts = idx * h
    else:
        ts = np.sort(rng.uniform(0.1 * T, T, size=m))
        ts[-1] = T
        while np.any(np.diff(ts) < 0.03 * T):
            ts = np.sort(rng.uniform(0.1 * T, T, size=m))
            ts[-1] = T

    scale = 10.0 ** rng.uniform(-0.5, 0.5)
    if monotone == "increasing":
        alphas = np.cumsum(rng.uniform(0.3, 1.0, size=m)) * scale
    else:
        steps_a = rng.uniform(-0.6, 1.0, size=m)
        alphas = np.cumsum(steps_a) * scale
        alphas -= min(0.0, alphas.min()) * 0.5
    lam_val = lam if lam is not None else float(rng.choice([1.0, 10.0, 100.0]))
    x_max = max(float(np.max(np.abs(alphas))), 0.1 * scale) * bound_slack
    data = tuple(DataPoint(float(t), float(a), 1.0) for t, a in zip(ts, alphas))
    return validate(
        ProblemSpec(data=data, x_max=x_max, lam=lam_val, boundary=boundary)
    )


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
