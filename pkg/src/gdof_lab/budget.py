"""Optimal allocation of a total CSIT budget across the four links.

The budget is the plain sum beta11+beta12+beta21+beta22.  Because the sum GDoF
depends on beta only through the row minima, the 4-variable allocation reduces
to two variables (x1, x2) with per-row cost 2*x_k: splitting a row unevenly
spends budget on a non-minimal entry that the formula ignores.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import ValidationError, _as_matrix, dsum_value

__all__ = [
    "BudgetAllocation",
    "BudgetCurve",
    "optimize_allocation",
    "budget_curve",
    "different_preference_gdof",
]

DEFAULT_STEP = 0.01


@dataclass(frozen=True)
class BudgetAllocation:
    beta: tuple  # 2x2 witness matrix
    total: float  # sum of entries actually spent
    achieved: float  # resulting sum GDoF


@dataclass(frozen=True)
class BudgetCurve:
    points: tuple  # (budget, optimal d_sum, witness BudgetAllocation)
    breakpoints: tuple  # budgets where the slope changes


def _grid(cap, step):
    values = np.arange(0.0, cap + step / 2.0, step)
    if values.size == 0 or values[-1] < cap - 1e-12:
        values = np.append(values, cap)
    values[-1] = min(values[-1], cap)
    return values


def optimize_allocation(alpha, budget, step=DEFAULT_STEP) -> BudgetAllocation:
    """Maximize the sum GDoF over allocations with total cost <= budget.

    Searches the reduced (x1, x2) grid with beta_k1 = beta_k2 = x_k and cost
    2*x1 + 2*x2; among optimal points the lexicographically smallest (x1, x2)
    is returned.  Excess budget saturates at the row caps.
    """
    alpha = _as_matrix("alpha", alpha)
    if budget < 0:
        raise ValidationError("budget must be >= 0")
    if step <= 0:
        raise ValidationError("step must be positive")
    cap1 = min(alpha[0][0], alpha[0][1])
    cap2 = min(alpha[1][0], alpha[1][1])
    g1 = _grid(cap1, step)
    g2 = _grid(cap2, step)
    x1, x2 = np.meshgrid(g1, g2, indexing="ij")
    d = dsum_value(alpha, x1, x2)
    feasible = 2.0 * (x1 + x2) <= budget + 1e-9
    best = np.max(np.where(feasible, d, -np.inf))
    # row-major scan order is lexicographic in (x1, x2)
    idx = int(np.argmax(feasible & (d >= best - 1e-12)))
    i, j = np.unravel_index(idx, d.shape)
    b1, b2 = float(g1[i]), float(g2[j])
    return BudgetAllocation(
        beta=((b1, b1), (b2, b2)),
        total=2.0 * (b1 + b2),
        achieved=float(d[i, j]),
    )


def budget_curve(alpha, budgets, step=DEFAULT_STEP) -> BudgetCurve:
    """Optimal d_sum per budget plus slope-change breakpoints."""
    budgets = np.asarray(budgets, dtype=float)
    if budgets.size == 0 or np.any(np.diff(budgets) <= 0):
        raise ValidationError("budgets must be a nonempty ascending grid")
    points = tuple(
        (float(b), (alloc := optimize_allocation(alpha, b, step)).achieved, alloc)
        for b in budgets
    )
    breakpoints = []
    if len(points) >= 3:
        b = np.array([p[0] for p in points])
        d = np.array([p[1] for p in points])
        slopes = np.diff(d) / np.diff(b)
        for i in range(1, slopes.size):
            if abs(slopes[i] - slopes[i - 1]) > 10.0 * step:
                breakpoints.append(float(b[i]))
    return BudgetCurve(points=points, breakpoints=tuple(breakpoints))


def different_preference_gdof(alpha, beta1, beta2) -> float:
    """Closed form for the regime where each antenna prefers a different user.

    Requires alpha11 > alpha21 and alpha22 > alpha12 strictly; beta1, beta2 are
    the effective (row-minimum) CSIT levels within their row caps.
    """
    (a11, a12), (a21, a22) = _as_matrix("alpha", alpha)
    if not (a11 > a21 and a22 > a12):
        raise ValidationError(
            "requires antenna 1 to strictly prefer user 1 and antenna 2 user 2"
        )
    if not 0 <= beta1 <= min(a11, a12):
        raise ValidationError("beta1 must lie in [0, min(alpha11, alpha12)]")
    if not 0 <= beta2 <= min(a21, a22):
        raise ValidationError("beta2 must lie in [0, min(alpha21, alpha22)]")
    return min(
        a22 + max(a11 - a12, 0.0) + beta1,
        a11 + max(a22 - a21, 0.0) + beta2,
    )
