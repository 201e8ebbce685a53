"""Temporal Bell inequalities, violation maps and three-time pseudo-probabilities.

For a preparation ``a`` and results ``b`` at ``t_b`` and ``c`` at ``t_c`` the
two evaluable families are::

    dP_I  = p_ac[a,c] - p_ab[a,b]  - p_bc[a,-b,c]  <= 0
    dP_II = p_ab[a,b] - p_ac[a,c]  - p_bc[a,b,-c]  <= 0

A positive value is a violation of the macrorealist bound.  The third family
needs the system to start from both preparations and is rejected.

Uncertainties attached to a violation cell are those of every measurement
event appearing in the three terms.  In type I the intermediate measurement
is assigned ``b`` in one term and ``-b`` in another, so ``dx_ab`` is the
larger of the two.  Grid uncertainties are stored in units of ``|X|``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .errors import UnsupportedInequalityError
from .two_level import (
    SIGNS,
    CorrelationTable,
    Dynamics,
    Weighting,
    check_sign,
    conditional,
    outcome_spread,
    sign_index,
)

TYPE_III_REASON = (
    "type III inequalities are ruled out: they require preparing the system "
    "in both states at t_a, while the test prepares it in a definite state"
)


class InequalityType(str, Enum):
    I = "I"
    II = "II"
    III = "III"

    @classmethod
    def parse(cls, value) -> InequalityType:
        if isinstance(value, cls):
            return value
        try:
            return cls(str(value).upper())
        except ValueError:
            raise ValueError(f"unknown inequality type {value!r}") from None


EVALUABLE = (InequalityType.I, InequalityType.II)


def require_evaluable(kind) -> InequalityType:
    kind = InequalityType.parse(kind)
    if kind is InequalityType.III:
        raise UnsupportedInequalityError(TYPE_III_REASON)
    return kind


@dataclass(frozen=True)
class SignAssignment:
    s_a: int
    s_b: int
    s_c: int

    def __post_init__(self):
        for s in (self.s_a, self.s_b, self.s_c):
            check_sign(s)

    @classmethod
    def all(cls) -> tuple[SignAssignment, ...]:
        """The eight assignments, lexicographic with ``+`` before ``-``."""
        return tuple(cls(*s) for s in itertools.product(SIGNS, repeat=3))

    @classmethod
    def parse(cls, text: str) -> SignAssignment:
        if len(text) != 3 or set(text) - {"+", "-"}:
            raise ValueError(f"signs must be three characters from '+-', got {text!r}")
        return cls(*(1 if ch == "+" else -1 for ch in text))

    def flipped(self) -> SignAssignment:
        return SignAssignment(-self.s_a, -self.s_b, -self.s_c)

    def __str__(self) -> str:
        return "".join("+" if s > 0 else "-" for s in (self.s_a, self.s_b, self.s_c))


CANONICAL_SIGNS = SignAssignment(1, -1, -1)


def delta_p_from_table(kind, signs: SignAssignment, table: CorrelationTable):
    """Inequality excess computed from a correlation table (broadcasts)."""
    kind = require_evaluable(kind)
    a, b, c = signs.s_a, signs.s_b, signs.s_c
    if kind is InequalityType.I:
        return table.ac(a, c) - table.ab(a, b) - table.bc(a, -b, c)
    return table.ab(a, b) - table.ac(a, c) - table.bc(a, b, -c)


def delta_p(kind, signs: SignAssignment, t_ab, t_bc, dynamics: Dynamics):
    """Inequality excess at ``(t_ab, t_bc)``; positive means violation."""
    kind = require_evaluable(kind)
    return delta_p_from_table(kind, signs, dynamics.table(t_ab, t_bc))


def delta_p_from_joint(kind, signs: SignAssignment, joint):
    """Inequality excess implied by a three-time distribution ``joint[a, b, c]``.

    Two-time probabilities are its marginals, with the ``bc`` term summed over
    the first time.  For any non-negative ``joint`` the result is ``<= 0``.
    Extra leading axes of ``joint`` are treated as a batch.
    """
    kind = require_evaluable(kind)
    joint = np.asarray(joint, dtype=float)
    ia, ib, ic = (sign_index(s) for s in (signs.s_a, signs.s_b, signs.s_c))
    p_ab = joint.sum(axis=-1)
    p_ac = joint.sum(axis=-2)
    p_bc = joint.sum(axis=-3)
    if kind is InequalityType.I:
        return p_ac[..., ia, ic] - p_ab[..., ia, ib] - p_bc[..., 1 - ib, ic]
    return p_ab[..., ia, ib] - p_ac[..., ia, ic] - p_bc[..., ib, 1 - ic]


def _two_time_spread(assigned: int, probs: np.ndarray, magnitude: float):
    return outcome_spread(assigned * magnitude, {1: probs[0], -1: probs[1]}, magnitude)


def uncertainties_from_table(
    kind,
    signs: SignAssignment,
    table: CorrelationTable,
    magnitude: float,
    weighting: Weighting = "joint",
):
    """Effective uncertainties ``(dx_ab, dx_ac, dx_bc)`` in observable units.

    ``dx_ab`` covers every assignment the intermediate measurement receives,
    ``dx_ac`` the final measurement without an intermediate one, and
    ``dx_bc`` the final measurement following the intermediate result used in
    the sequential term.
    """
    kind = require_evaluable(kind)
    a, b, c = signs.s_a, signs.s_b, signs.s_c
    ia = sign_index(a)
    p_ab = table.p_ab[ia]
    if kind is InequalityType.I:
        dx_ab = np.maximum(
            _two_time_spread(b, p_ab, magnitude),
            _two_time_spread(-b, p_ab, magnitude),
        )
        mid, assigned = -b, c
    else:
        dx_ab = _two_time_spread(b, p_ab, magnitude)
        mid, assigned = b, -c
    dx_ac = _two_time_spread(c, table.p_ac[ia], magnitude)
    seq = {s: table.bc(a, mid, s) for s in SIGNS}
    if weighting == "conditional":
        seq = conditional(seq, table.ab(a, mid))
    elif weighting != "joint":
        raise ValueError(f"unknown weighting {weighting!r}")
    dx_bc = outcome_spread(assigned * magnitude, seq, magnitude)
    return dx_ab, dx_ac, dx_bc


@dataclass(frozen=True)
class ViolationCell:
    """One grid point: inequality excess and uncertainties in units of ``|X|``."""

    t_ab: float
    t_bc: float
    delta_p: float
    dx_ab: float
    dx_ac: float
    dx_bc: float

    @property
    def max_dx(self) -> float:
        return max(self.dx_ab, self.dx_ac, self.dx_bc)


@dataclass(frozen=True, eq=False)
class ViolationGrid:
    """Vectorized violation map; arrays are indexed ``[i_ab, i_bc]``."""

    kind: InequalityType
    signs: SignAssignment
    t_ab: np.ndarray
    t_bc: np.ndarray
    delta_p: np.ndarray
    dx_ab: np.ndarray
    dx_ac: np.ndarray
    dx_bc: np.ndarray

    @property
    def max_dx(self) -> np.ndarray:
        return np.maximum(np.maximum(self.dx_ab, self.dx_ac), self.dx_bc)

    def cells(self) -> list[ViolationCell]:
        """Cells in row-major ``(t_ab, t_bc)`` order."""
        out = []
        for i, t1 in enumerate(self.t_ab):
            for j, t2 in enumerate(self.t_bc):
                out.append(ViolationCell(
                    float(t1), float(t2), float(self.delta_p[i, j]),
                    float(self.dx_ab[i, j]), float(self.dx_ac[i, j]), float(self.dx_bc[i, j]),
                ))
        return out


def midpoint_times(n: int, span: float) -> np.ndarray:
    """Cell centres of ``n`` equal cells covering ``[0, span]``."""
    if n < 2:
        raise ValueError("grid needs at least 2 points per axis")
    if not (np.isfinite(span) and span > 0):
        raise ValueError("time span must be positive and finite")
    return (np.arange(n) + 0.5) * (span / n)


def default_span(dynamics: Dynamics) -> float:
    # frozen dynamics has no period; any span gives the same normalized sums
    period = dynamics.period
    return period if np.isfinite(period) else 1.0


def violation_grid(
    kind,
    signs: SignAssignment,
    dynamics: Dynamics,
    n: int = 256,
    span: float | None = None,
    weighting: Weighting = "joint",
) -> ViolationGrid:
    """Evaluate the inequality excess on the ``n x n`` midpoint grid over ``[0, span]^2``."""
    kind = require_evaluable(kind)
    t = midpoint_times(n, default_span(dynamics) if span is None else span)
    t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
    table = dynamics.table(t_ab, t_bc)
    dx = uncertainties_from_table(kind, signs, table, dynamics.magnitude, weighting)
    return ViolationGrid(
        kind, signs, t, t.copy(), delta_p_from_table(kind, signs, table),
        *(d / dynamics.magnitude for d in dx),
    )


def violation_map(
    kind,
    signs: SignAssignment,
    dynamics: Dynamics,
    n: int = 256,
    span: float | None = None,
    weighting: Weighting = "joint",
) -> list[ViolationCell]:
    return violation_grid(kind, signs, dynamics, n, span, weighting).cells()


@dataclass(frozen=True, eq=False)
class PseudoJoint:
    """Three-time quasi-distribution ``q[b, c]`` for a fixed preparation.

    The entries with ``b == reference_branch`` are quantum sequential joint
    probabilities; the other two are fixed by the two-time ``ac`` marginal
    and may be negative.  Trailing axes run over a grid of times.
    """

    prep: int
    reference_branch: int
    q: np.ndarray

    def at(self, b: int, c: int):
        return self.q[sign_index(b), sign_index(c)]

    @property
    def min_entry(self):
        return self.q.min(axis=(0, 1))

    def marginal_defect(self, table: CorrelationTable) -> float:
        ia = sign_index(self.prep)
        return float(max(
            np.max(np.abs(self.q.sum(axis=(0, 1)) - 1.0)),
            np.max(np.abs(self.q.sum(axis=1) - table.p_ab[ia])),
            np.max(np.abs(self.q.sum(axis=0) - table.p_ac[ia])),
        ))


def pseudo_joint_from_table(
    prep: int, reference_branch: int, table: CorrelationTable, atol: float = 1e-10
) -> PseudoJoint:
    check_sign(prep)
    ia, ir = sign_index(prep), sign_index(reference_branch)
    q = np.empty(table.p_bc.shape[1:])
    q[ir] = table.p_bc[ia, ir]
    q[1 - ir] = table.p_ac[ia] - q[ir]
    pj = PseudoJoint(prep, reference_branch, q)
    defect = pj.marginal_defect(table)
    if defect > atol:
        raise AssertionError(f"pseudo-joint marginals off by {defect:.3e}")
    return pj


def pseudo_joint(prep: int, t_ab, t_bc, reference_branch: int, dynamics: Dynamics) -> PseudoJoint:
    """Reconstruct the three-time quasi-distribution at ``(t_ab, t_bc)``."""
    atol = getattr(dynamics, "marginal_atol", 1e-10)
    return pseudo_joint_from_table(prep, reference_branch, dynamics.table(t_ab, t_bc), atol)
