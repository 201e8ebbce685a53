"""Overlap between the violation region and the well-resolved region.

For a resolution threshold ``xi`` (units of ``|X|``) the overlap is the
normalized integral of the inequality excess over the cells where the
inequality is violated and every effective uncertainty is ``<= xi``.  With
the midpoint rule on ``[0, tau]^2`` the ``tau`` factors cancel, leaving the
sum of admissible excesses divided by the number of cells.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import NoViolationError
from .inequalities import (
    EVALUABLE,
    InequalityType,
    SignAssignment,
    ViolationCell,
    ViolationGrid,
    require_evaluable,
    violation_grid,
)
from .two_level import Dynamics, Weighting

XI_MAX = 2.0
OVERLAP_FLOOR = 1e-14
HALF_WIDTH_XI = (2.0 * math.log(2.0)) ** -0.5


@dataclass(frozen=True)
class ResolutionCriterion:
    name: str
    xi: float

    def __post_init__(self):
        if not 0.0 <= self.xi <= XI_MAX:
            raise ValueError(f"criterion threshold must lie in [0, 2], got {self.xi}")


CRITERIA = {
    "half_width": ResolutionCriterion("half_width", HALF_WIDTH_XI),
    "unit": ResolutionCriterion("unit", 1.0),
    "max": ResolutionCriterion("max", XI_MAX),
}


def criterion(name: str) -> ResolutionCriterion:
    try:
        return CRITERIA[name]
    except KeyError:
        raise ValueError(f"unknown criterion {name!r}; choose from {sorted(CRITERIA)}") from None


def _check_xi(xi) -> None:
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0) or np.any(xi > XI_MAX):
        raise ValueError("xi must lie in [0, 2] (units of |X|)")


def admissible(cell: ViolationCell, xi: float) -> bool:
    """True when the cell violates the inequality and is resolved at ``xi``."""
    _check_xi(xi)
    return cell.delta_p > 0 and cell.max_dx <= xi


class OverlapEvaluator:
    """Overlap ``O(xi)`` for one violation grid, cheap to query repeatedly.

    Violating cells are sorted by their largest uncertainty and the excess is
    accumulated in that order, so ``O`` is exactly nondecreasing in ``xi``.
    """

    def __init__(self, grid: ViolationGrid):
        self.grid = grid
        mask = grid.delta_p > 0
        dx = grid.max_dx[mask]
        excess = grid.delta_p[mask]
        order = np.argsort(dx, kind="stable")
        self._dx = dx[order]
        self._cumulative = np.concatenate([[0.0], np.cumsum(excess[order])]) / grid.delta_p.size

    def __call__(self, xi):
        _check_xi(xi)
        value = self._cumulative[np.searchsorted(self._dx, xi, side="right")]
        return np.where(value > OVERLAP_FLOOR, value, 0.0)

    def positive_part(self) -> float:
        """Overlap with no resolution constraint."""
        return float(self._cumulative[-1])

    def bracket(self, tolerance: float = 1e-3) -> tuple[float, float]:
        """Bisect for the onset of a positive overlap.

        Returns ``(lo, hi)`` with ``O(lo) = 0``, ``O(hi) > 0`` and
        ``hi - lo <= tolerance``.
        """
        if not tolerance > 0:
            raise ValueError("tolerance must be positive")
        lo, hi = 0.0, XI_MAX
        if self(hi) <= 0:
            raise NoViolationError("no violation region: overlap vanishes at xi = 2|X|")
        if self(lo) > 0:
            return lo, lo
        while hi - lo > tolerance:
            mid = 0.5 * (lo + hi)
            if self(mid) > 0:
                hi = mid
            else:
                lo = mid
        return lo, hi


def overlap_integral(
    kind,
    signs: SignAssignment,
    xi: float,
    dynamics: Dynamics,
    n: int = 256,
    weighting: Weighting = "joint",
) -> float:
    """Overlap of violation and resolution regions at threshold ``xi``."""
    _check_xi(xi)
    grid = violation_grid(kind, signs, dynamics, n, weighting=weighting)
    return float(OverlapEvaluator(grid)(xi))


def xi_threshold(
    kind,
    signs: SignAssignment,
    dynamics: Dynamics,
    n: int = 256,
    tolerance: float = 1e-3,
    weighting: Weighting = "joint",
) -> float:
    """Smallest threshold (units of ``|X|``) giving a positive overlap, to ``tolerance``."""
    grid = violation_grid(kind, signs, dynamics, n, weighting=weighting)
    return OverlapEvaluator(grid).bracket(tolerance)[1]


@dataclass(frozen=True, eq=False)
class OverlapCurve:
    """Sampled ``O_I(xi)`` and ``O_II(xi)`` with their onset thresholds."""

    signs: SignAssignment
    xi: np.ndarray
    overlap_I: np.ndarray
    overlap_II: np.ndarray
    xi_I: float
    xi_II: float
    n_time: int
    n_xi: int
    brackets: dict = field(default_factory=dict)

    @property
    def samples(self) -> list[tuple[float, float, float]]:
        return [(float(x), float(a), float(b))
                for x, a, b in zip(self.xi, self.overlap_I, self.overlap_II)]


def overlap_curve(
    signs: SignAssignment,
    dynamics: Dynamics,
    n_time: int = 256,
    n_xi: int = 200,
    tolerance: float = 1e-3,
    weighting: Weighting = "joint",
) -> OverlapCurve:
    """Sample both overlaps on ``n_xi`` uniform thresholds in ``[0, 2]``."""
    if n_xi < 2:
        raise ValueError("n_xi must be at least 2")
    xi = np.linspace(0.0, XI_MAX, n_xi)
    values, brackets = {}, {}
    for kind in EVALUABLE:
        evaluator = OverlapEvaluator(violation_grid(kind, signs, dynamics, n_time, weighting=weighting))
        values[kind] = evaluator(xi)
        brackets[kind.value] = evaluator.bracket(tolerance)
    return OverlapCurve(
        signs, xi, values[InequalityType.I], values[InequalityType.II],
        brackets["I"][1], brackets["II"][1], n_time, n_xi, brackets,
    )

