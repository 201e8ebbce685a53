"""Kinematics and dynamics of a bistable two-state system.

States live on the ``{|+>, |->}`` eigenbasis of the dichotomic observable.
Free evolution is the Rabi rotation ``exp(-i Omega sigma_x t)`` and a
measurement with result ``s`` is the rank-one filter onto ``|s>``.  Filtered
states are kept unnormalized, so the squared norm after a chain of filters is
directly the joint probability of that chain of results.

All functions broadcast over numpy arrays of times, which is how the grid
sweeps in :mod:`tbilab.inequalities` use them.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Literal, Protocol

import numpy as np

from .errors import ImpossibleBranchError

TWO_PI = 2.0 * np.pi
SIGNS = (1, -1)
SPIN_MAGNITUDE = 0.5
FLUX_MAGNITUDE = 1.0

UncertaintyKind = Literal["ab", "ac", "bc"]
Weighting = Literal["joint", "conditional"]


def sign_index(sign: int) -> int:
    """Array index of a sign: 0 for ``+1``, 1 for ``-1``."""
    check_sign(sign)
    return 0 if sign > 0 else 1


def check_sign(sign: int) -> None:
    if sign not in SIGNS:
        raise ValueError(f"sign must be +1 or -1, got {sign!r}")


def _check_times(*times) -> None:
    for t in times:
        if np.any(np.asarray(t) < 0):
            raise ValueError("time intervals must be non-negative")


@dataclass(frozen=True)
class Outcome:
    """Measurement result ``sign * magnitude`` of the dichotomic observable."""

    sign: int
    magnitude: float = SPIN_MAGNITUDE

    def __post_init__(self):
        check_sign(self.sign)
        if not self.magnitude > 0:
            raise ValueError("outcome magnitude must be positive")

    @property
    def value(self) -> float:
        return self.sign * self.magnitude

    def flipped(self) -> Outcome:
        return Outcome(-self.sign, self.magnitude)


@dataclass(frozen=True)
class RabiParams:
    """Rabi angular frequency ``omega`` (rad/s)."""

    omega: float

    def __post_init__(self):
        if not self.omega >= 0:
            raise ValueError("omega must be non-negative")

    @property
    def period(self) -> float:
        """Oscillation period ``2 pi / omega``; infinite for frozen dynamics."""
        return TWO_PI / self.omega if self.omega > 0 else float("inf")

    @classmethod
    def from_period(cls, period: float) -> RabiParams:
        return cls(TWO_PI / period)


@dataclass(frozen=True, eq=False)
class TwoLevelState:
    """Amplitudes on ``|+>`` and ``|->``; either may be an array."""

    c_plus: complex | np.ndarray
    c_minus: complex | np.ndarray

    @classmethod
    def prepared(cls, sign: int) -> TwoLevelState:
        check_sign(sign)
        return cls(1.0 + 0j, 0j) if sign > 0 else cls(0j, 1.0 + 0j)

    @property
    def norm_sq(self):
        return np.abs(self.c_plus) ** 2 + np.abs(self.c_minus) ** 2

    def amplitude(self, sign: int):
        return self.c_plus if sign_index(sign) == 0 else self.c_minus


def evolve(state: TwoLevelState, params: RabiParams, dt) -> TwoLevelState:
    """Apply ``exp(-i Omega sigma_x dt)`` to ``state``."""
    _check_times(dt)
    theta = np.mod(params.omega * np.asarray(dt, dtype=float), TWO_PI)
    c, s = np.cos(theta), np.sin(theta)
    return TwoLevelState(
        c * state.c_plus - 1j * s * state.c_minus,
        c * state.c_minus - 1j * s * state.c_plus,
    )


def _filter(state: TwoLevelState, sign: int) -> TwoLevelState:
    zero = np.zeros_like(state.c_plus + state.c_minus)
    if sign_index(sign) == 0:
        return TwoLevelState(state.c_plus + zero, zero)
    return TwoLevelState(zero, state.c_minus + zero)


def apply_projector(state: TwoLevelState, outcome: Outcome | int):
    """Filter ``state`` on a measurement result.

    Returns the unnormalized filtered state and the probability of the result
    relative to the input weight.  The filter is idempotent.

    Raises
    ------
    ImpossibleBranchError
        If the input state has zero norm.
    """
    sign = outcome.sign if isinstance(outcome, Outcome) else outcome
    norm = state.norm_sq
    if np.any(norm > 1.0 + 1e-12):
        raise ValueError("state squared norm exceeds 1")
    if np.any(norm == 0):
        raise ImpossibleBranchError("cannot measure a zero-norm state")
    filtered = _filter(state, sign)
    return filtered, filtered.norm_sq / norm


def _same_magnitude(*outcomes: Outcome | None) -> float:
    mags = {o.magnitude for o in outcomes if o is not None}
    if len(mags) != 1:
        raise ValueError(f"outcomes must share one magnitude, got {sorted(mags)}")
    return mags.pop()


def pair_probability(prep: Outcome, t, result: Outcome, params: RabiParams):
    """Probability ``|Pi_result U(t) |prep>|^2``."""
    _same_magnitude(prep, result)
    _check_times(t)
    state = evolve(TwoLevelState.prepared(prep.sign), params, t)
    return _filter(state, result.sign).norm_sq


def sequential_joint_probability(
    prep: Outcome, t_ab, mid: Outcome, t_bc, fin: Outcome, params: RabiParams
):
    """Joint probability of ``mid`` after ``t_ab`` and then ``fin`` after ``t_bc``."""
    _same_magnitude(prep, mid, fin)
    _check_times(t_ab, t_bc)
    state = evolve(TwoLevelState.prepared(prep.sign), params, t_ab)
    state = evolve(_filter(state, mid.sign), params, t_bc)
    return _filter(state, fin.sign).norm_sq


def outcome_spread(assigned: float, probabilities: dict[int, object], magnitude: float):
    """Root of the outcome-weighted squared deviation from ``assigned``.

    ``probabilities`` maps each sign to the (possibly array valued)
    probability of observing ``sign * magnitude``.
    """
    total = sum(
        (assigned - s * magnitude) ** 2 * np.asarray(p, dtype=float)
        for s, p in probabilities.items()
    )
    return np.sqrt(np.maximum(total, 0.0))


def effective_uncertainty(
    kind: UncertaintyKind,
    prep: Outcome,
    mid: Outcome | None,
    fin: Outcome | None,
    t_ab,
    t_bc,
    params: RabiParams,
    weighting: Weighting = "joint",
):
    """Effective uncertainty of one measurement event, in observable units.

    ``ab`` is the measurement at ``t_b`` assigned ``mid``; ``ac`` is a
    measurement at ``t_b + t_bc`` (no intermediate filter) assigned ``fin``;
    ``bc`` is the final measurement after an intermediate result ``mid``,
    assigned ``fin``.  With ``weighting="joint"`` the ``bc`` deviations are
    weighted by the unconditioned sequential probabilities, otherwise by the
    probabilities conditioned on ``mid``.
    """
    magnitude = _same_magnitude(prep, mid, fin)
    _check_times(t_ab, t_bc)
    if kind == "ab":
        probs = {s: pair_probability(prep, t_ab, Outcome(s, magnitude), params) for s in SIGNS}
        return outcome_spread(mid.value, probs, magnitude)
    if kind == "ac":
        t = np.asarray(t_ab) + np.asarray(t_bc)
        probs = {s: pair_probability(prep, t, Outcome(s, magnitude), params) for s in SIGNS}
        return outcome_spread(fin.value, probs, magnitude)
    if kind == "bc":
        probs = {
            s: sequential_joint_probability(
                prep, t_ab, mid, t_bc, Outcome(s, magnitude), params
            )
            for s in SIGNS
        }
        if weighting == "conditional":
            probs = conditional(probs, pair_probability(prep, t_ab, mid, params))
        elif weighting != "joint":
            raise ValueError(f"unknown weighting {weighting!r}")
        return outcome_spread(fin.value, probs, magnitude)
    raise ValueError(f"unknown uncertainty kind {kind!r}")


def conditional(joint: dict[int, object], marginal) -> dict[int, object]:
    """Divide joint probabilities by a marginal; zero where the marginal vanishes."""
    marginal = np.asarray(marginal, dtype=float)
    out = {}
    for s, p in joint.items():
        p = np.asarray(p, dtype=float)
        out[s] = np.divide(p, marginal, out=np.zeros(np.broadcast(p, marginal).shape),
                           where=marginal > 0)
    return out


@dataclass(frozen=True, eq=False)
class CorrelationTable:
    """Two-time and sequential joint probabilities at fixed ``(t_ab, t_bc)``.

    Arrays are indexed by sign position (0 for ``+``, 1 for ``-``):
    ``p_ab[a, b]``, ``p_ac[a, c]`` and ``p_bc[a, b, c]``, where ``p_bc`` is
    the joint probability of ``b`` then ``c`` given preparation ``a``.
    Trailing axes, when present, run over a grid of times.
    """

    t_ab: float | np.ndarray
    t_bc: float | np.ndarray
    p_ab: np.ndarray
    p_ac: np.ndarray
    p_bc: np.ndarray

    def ab(self, a: int, b: int):
        return self.p_ab[sign_index(a), sign_index(b)]

    def ac(self, a: int, c: int):
        return self.p_ac[sign_index(a), sign_index(c)]

    def bc(self, a: int, b: int, c: int):
        return self.p_bc[sign_index(a), sign_index(b), sign_index(c)]

    def marginal_defect(self) -> float:
        """Largest violation of normalization and of the sequential marginal law."""
        return float(max(
            np.max(np.abs(self.p_ab.sum(axis=1) - 1.0)),
            np.max(np.abs(self.p_ac.sum(axis=1) - 1.0)),
            np.max(np.abs(self.p_bc.sum(axis=2) - self.p_ab)),
        ))


def correlation_table(params: RabiParams, t_ab, t_bc) -> CorrelationTable:
    """Correlation table obtained by explicit propagation and filtering."""
    _check_times(t_ab, t_bc)
    t_ab, t_bc = np.broadcast_arrays(np.asarray(t_ab, float), np.asarray(t_bc, float))
    shape = t_ab.shape
    p_ab = np.empty((2, 2) + shape)
    p_ac = np.empty((2, 2) + shape)
    p_bc = np.empty((2, 2, 2) + shape)
    for a in SIGNS:
        ia = sign_index(a)
        prepared = TwoLevelState.prepared(a)
        at_b = evolve(prepared, params, t_ab)
        at_c = evolve(prepared, params, t_ab + t_bc)
        for b in SIGNS:
            filtered = _filter(at_b, b)
            p_ab[ia, sign_index(b)] = filtered.norm_sq
            later = evolve(filtered, params, t_bc)
            for c in SIGNS:
                p_bc[ia, sign_index(b), sign_index(c)] = _filter(later, c).norm_sq
        for c in SIGNS:
            p_ac[ia, sign_index(c)] = _filter(at_c, c).norm_sq
    return CorrelationTable(t_ab, t_bc, p_ab, p_ac, p_bc)


def spin_closed_form(t_ab, t_bc, params: RabiParams) -> CorrelationTable:
    """Correlation table from the analytic precession formulas."""
    _check_times(t_ab, t_bc)
    t_ab, t_bc = np.broadcast_arrays(np.asarray(t_ab, float), np.asarray(t_bc, float))

    def stay_flip(t):
        theta = np.mod(params.omega * t, TWO_PI)
        flip = np.sin(theta) ** 2
        return np.stack([np.stack([1.0 - flip, flip]), np.stack([flip, 1.0 - flip])])

    p_ab = stay_flip(t_ab)
    p_ac = stay_flip(t_ab + t_bc)
    p_bc = p_ab[:, :, None] * stay_flip(t_bc)[None, :, :]
    return CorrelationTable(t_ab, t_bc, p_ab, p_ac, p_bc)


class Dynamics(Protocol):
    """Anything that yields correlation tables on grids of times."""

    magnitude: float

    @property
    def period(self) -> float: ...

    def table(self, t_ab, t_bc) -> CorrelationTable: ...


@dataclass(frozen=True)
class SpinDynamics:
    """Precessing spin-1/2 with ``sigma_z`` measurements.

    ``closed_form=True`` evaluates the analytic formulas instead of
    propagating amplitudes; both routes must agree.
    """

    params: RabiParams
    magnitude: float = SPIN_MAGNITUDE
    closed_form: bool = False

    @classmethod
    def with_omega(cls, omega: float, **kwargs) -> SpinDynamics:
        return cls(RabiParams(omega), **kwargs)

    @property
    def period(self) -> float:
        return self.params.period

    def table(self, t_ab, t_bc) -> CorrelationTable:
        if self.closed_form:
            return spin_closed_form(t_ab, t_bc, self.params)
        return correlation_table(self.params, t_ab, t_bc)
