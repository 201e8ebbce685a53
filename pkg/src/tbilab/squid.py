"""rf-SQUID flux dynamics at half-integer flux bias.

The flux coordinate is the dimensionless ``phi = (Phi - Phi_ext) / Phi_0``,
so the capacitance enters as the effective mass ``C Phi_0**2`` and
the Hamiltonian reads::

    H = -hbar**2 / (2 C Phi_0**2) d^2/dphi^2 + V(phi)

``V`` is either the quartic double well ``(pi^3/3) I_c Phi_0 (phi^2 - phi0^2)^2``
or the full inductive-plus-Josephson potential.  Both are shifted so the well
bottoms sit at zero energy.

A measurement of the sign of the flux is the half-line projector.  The
propagation works in the basis of the lowest ``M`` eigenstates: phases for
free evolution, the projector as an ``M x M`` matrix, and the weight that a
projection pushes outside the basis is tracked as leakage.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass

import numpy as np
from scipy import constants, optimize
from scipy.linalg import eigh_tridiagonal

from .errors import (
    BasisTruncationError,
    DegenerateSpectrumError,
    DomainTruncationError,
    NoDoubleWellError,
    TwoLevelRegimeError,
)
from .two_level import FLUX_MAGNITUDE, SIGNS, CorrelationTable, RabiParams, sign_index, spin_closed_form

HBAR = constants.hbar
FLUX_QUANTUM = constants.physical_constants["mag. flux quantum"][0]  # h / 2e
POTENTIAL_FORMS = ("quartic", "full_cosine")
BETA_MAX = 2.5 * math.pi

DEFAULT_POINTS = 2048
DEFAULT_MODES = 16
WIDTH_SIGMAS = 10.0
LOCALIZATION_MIN = 0.9


@dataclass(frozen=True)
class SquidParams:
    """Circuit parameters in SI units; external flux is ``(n + 1/2) Phi_0``."""

    L: float
    C: float
    I_c: float
    n: int = 0
    potential_form: str = "quartic"

    def __post_init__(self):
        for name in ("L", "C", "I_c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.potential_form not in POTENTIAL_FORMS:
            raise ValueError(f"potential_form must be one of {POTENTIAL_FORMS}")

    @classmethod
    def reference(cls, **overrides) -> SquidParams:
        """L = 150 pH, C = 0.15 pF, I_c = 2.5 uA."""
        values = dict(L=150e-12, C=0.15e-12, I_c=2.5e-6)
        values.update(overrides)
        return cls(**values)

    def replace(self, **changes) -> SquidParams:
        return dataclasses.replace(self, **changes)

    @property
    def beta(self) -> float:
        return 2.0 * math.pi * self.L * self.I_c / FLUX_QUANTUM

    @property
    def mass(self) -> float:
        """Effective mass for the dimensionless flux coordinate (J s^2)."""
        return self.C * FLUX_QUANTUM ** 2


def bistability_index(params: SquidParams) -> tuple[float, bool]:
    beta = params.beta
    return beta, 1.0 < beta < BETA_MAX


def find_minima(params: SquidParams) -> float:
    """Positive well position, root of ``sin(2 pi phi) / phi = Phi_0 / (L I_c)``."""
    beta, ok = bistability_index(params)
    if not ok:
        raise NoDoubleWellError(f"no double well: beta = {beta:.6g} is not bistable")
    ratio = FLUX_QUANTUM / (params.L * params.I_c)

    # 2*pi*sinc(2 phi) is sin(2 pi phi)/phi with its limit at 0: positive at 0, -ratio at 1/2
    def f(phi):
        return 2.0 * math.pi * float(np.sinc(2.0 * phi)) - ratio

    return optimize.bisect(f, 0.0, 0.5, xtol=1e-15, rtol=1e-12, maxiter=200)


def quartic_coefficient(params: SquidParams) -> float:
    return math.pi ** 3 / 3.0 * params.I_c * FLUX_QUANTUM


def _full_cosine(params: SquidParams, phi):
    return (FLUX_QUANTUM ** 2 * phi ** 2 / (2.0 * params.L)
            + params.I_c * FLUX_QUANTUM / (2.0 * math.pi) * np.cos(2.0 * math.pi * phi))


def potential(params: SquidParams, phi, form: str | None = None):
    """Potential energy (J) at dimensionless flux ``phi``, zero at the minima."""
    form = form or params.potential_form
    phi0 = find_minima(params)
    phi = np.asarray(phi, dtype=float)
    if form == "quartic":
        return quartic_coefficient(params) * (phi ** 2 - phi0 ** 2) ** 2
    if form == "full_cosine":
        return _full_cosine(params, phi) - _full_cosine(params, phi0)
    raise ValueError(f"unknown potential form {form!r}")


def potential_slope(params: SquidParams, phi, form: str | None = None):
    form = form or params.potential_form
    phi = np.asarray(phi, dtype=float)
    if form == "quartic":
        phi0 = find_minima(params)
        return 4.0 * quartic_coefficient(params) * phi * (phi ** 2 - phi0 ** 2)
    return (FLUX_QUANTUM ** 2 * phi / params.L
            - params.I_c * FLUX_QUANTUM * np.sin(2.0 * math.pi * phi))


def curvature(params: SquidParams, form: str | None = None) -> float:
    """Second derivative of the potential at the well bottom (J)."""
    form = form or params.potential_form
    phi0 = find_minima(params)
    if form == "quartic":
        return 8.0 * quartic_coefficient(params) * phi0 ** 2
    return (FLUX_QUANTUM ** 2 / params.L
            - 2.0 * math.pi * params.I_c * FLUX_QUANTUM * math.cos(2.0 * math.pi * phi0))


def plasma_frequency(params: SquidParams, form: str | None = None) -> float:
    return math.sqrt(curvature(params, form) / params.mass)


def ground_width_sq(params: SquidParams, form: str | None = None) -> float:
    """Squared width of one ground-state peak, from ``C w0^2 s0^2 / 2 = hbar w0 / 4``."""
    return HBAR / (2.0 * params.mass * plasma_frequency(params, form))


def barrier_height(params: SquidParams, form: str | None = None) -> float:
    return float(potential(params, 0.0, form))


@dataclass(frozen=True)
class SpatialGrid:
    """Uniform flux grid including both Dirichlet end points."""

    phi_min: float
    phi_max: float
    n_points: int

    def __post_init__(self):
        if not self.phi_min < 0 < self.phi_max:
            raise ValueError("grid must straddle phi = 0")
        if self.n_points < 128:
            raise ValueError("grid needs at least 128 points")

    @classmethod
    def symmetric(cls, half_width: float, n_points: int = DEFAULT_POINTS) -> SpatialGrid:
        return cls(-half_width, half_width, n_points)

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.phi_min, self.phi_max, self.n_points)

    @property
    def spacing(self) -> float:
        return (self.phi_max - self.phi_min) / (self.n_points - 1)

    def refined(self) -> SpatialGrid:
        return SpatialGrid(self.phi_min, self.phi_max, 2 * self.n_points)


def default_grid(params: SquidParams, n_points: int = DEFAULT_POINTS) -> SpatialGrid:
    """Symmetric grid reaching ``WIDTH_SIGMAS`` peak widths beyond each minimum."""
    half = find_minima(params) + WIDTH_SIGMAS * math.sqrt(ground_width_sq(params))
    return SpatialGrid.symmetric(half, n_points)


@dataclass(frozen=True, eq=False)
class SpectralBasis:
    """Lowest eigenpairs on a grid; columns of ``wavefunctions`` are orthonormal
    under ``sum(conj(f) * g) * dphi``."""

    phi: np.ndarray
    energies: np.ndarray
    wavefunctions: np.ndarray

    @property
    def dphi(self) -> float:
        return float(self.phi[1] - self.phi[0])

    @property
    def modes(self) -> int:
        return len(self.energies)

    @property
    def splitting(self) -> float:
        return float(self.energies[1] - self.energies[0])

    @property
    def tunnel_period(self) -> float:
        return 2.0 * math.pi * HBAR / self.splitting

    def gram(self) -> np.ndarray:
        return self.wavefunctions.T @ self.wavefunctions * self.dphi

    def truncated(self, modes: int) -> SpectralBasis:
        if modes > self.modes:
            raise ValueError(f"basis holds {self.modes} modes, {modes} requested")
        return SpectralBasis(self.phi, self.energies[:modes], self.wavefunctions[:, :modes])


def solve_tridiagonal(
    grid: SpatialGrid,
    potential_values: np.ndarray,
    mass: float,
    modes: int = DEFAULT_MODES,
    check_boundary: bool = True,
    boundary_tol: float = 1e-6,
) -> SpectralBasis:
    """Lowest ``modes`` eigenpairs of the central-difference Hamiltonian.

    ``potential_values`` is sampled on ``grid.points``; the end points carry
    the Dirichlet condition.  Each eigenfunction is signed so that its largest
    value on ``phi > 0`` is positive.
    """
    if not 1 <= modes <= 32:
        raise ValueError("modes must lie in [1, 32]")
    phi = grid.points
    h = grid.spacing
    hop = HBAR ** 2 / (2.0 * mass * h ** 2)
    interior = np.asarray(potential_values, dtype=float)[1:-1]
    diag = 2.0 * hop + interior
    off = np.full(len(interior) - 1, -hop)
    energies, vectors = eigh_tridiagonal(diag, off, select="i", select_range=(0, modes - 1))
    if np.any(np.diff(energies) <= 0):
        raise DegenerateSpectrumError(
            "eigenvalues coincide at machine precision; the tunnel splitting is unresolvable"
        )
    psi = np.zeros((len(phi), modes))
    psi[1:-1] = vectors / math.sqrt(h)
    right = phi > 0
    for k in range(modes):
        col = psi[:, k]
        peak = np.argmax(np.abs(col * right))
        if col[peak] < 0:
            psi[:, k] = -col
    if check_boundary:
        edge = np.maximum(np.abs(psi[1]), np.abs(psi[-2])) / np.abs(psi).max(axis=0)
        worst = int(np.argmax(edge))
        if edge[worst] > boundary_tol:
            raise DomainTruncationError(
                f"domain truncation: mode {worst} keeps {edge[worst]:.2e} of its peak "
                "amplitude at the grid edge; widen the grid"
            )
    return SpectralBasis(phi, energies, psi)


def eigensolve(
    params: SquidParams, grid: SpatialGrid | None = None, modes: int = DEFAULT_MODES
) -> SpectralBasis:
    grid = grid or default_grid(params)
    return solve_tridiagonal(grid, potential(params, grid.points), params.mass, modes)


@dataclass(frozen=True)
class DoubleWellSummary:
    potential_form: str
    beta: float
    phi0: float
    barrier: float
    omega0: float
    sigma0_sq: float
    splitting: float
    tunnel_period: float

    @property
    def sigma0_ratio(self) -> float:
        """``sigma0^2 / phi0^2``; two-level treatment needs this well below 1."""
        return self.sigma0_sq / self.phi0 ** 2

    @property
    def tunnel_frequency(self) -> float:
        return 1.0 / self.tunnel_period


def well_summary(
    params: SquidParams,
    grid: SpatialGrid | None = None,
    modes: int = DEFAULT_MODES,
    basis: SpectralBasis | None = None,
) -> DoubleWellSummary:
    basis = basis or eigensolve(params, grid, modes)
    beta, _ = bistability_index(params)
    return DoubleWellSummary(
        potential_form=params.potential_form,
        beta=beta,
        phi0=find_minima(params),
        barrier=barrier_height(params),
        omega0=plasma_frequency(params),
        sigma0_sq=ground_width_sq(params),
        splitting=basis.splitting,
        tunnel_period=basis.tunnel_period,
    )


def half_line_weights(phi: np.ndarray, sign: int) -> np.ndarray:
    """Grid form of the projector on ``sign * phi > 0``; a point at 0 gets 1/2."""
    phi = np.asarray(phi, dtype=float)
    at_zero = np.isclose(phi, 0.0, rtol=0.0, atol=1e-12 * np.abs(phi).max())
    weights = (sign * phi > 0).astype(float)
    weights[at_zero] = 0.5
    return weights


@dataclass(frozen=True, eq=False)
class FluxState:
    phi: np.ndarray
    amplitudes: np.ndarray

    @property
    def dphi(self) -> float:
        return float(self.phi[1] - self.phi[0])

    @property
    def norm_sq(self) -> float:
        return float(np.sum(np.abs(self.amplitudes) ** 2) * self.dphi)

    def half_line_mass(self, sign: int) -> float:
        w = half_line_weights(self.phi, sign)
        return float(np.sum(w * np.abs(self.amplitudes) ** 2) * self.dphi)

    def coefficients(self, basis: SpectralBasis) -> np.ndarray:
        return basis.wavefunctions.T @ self.amplitudes * basis.dphi


def localized_states(basis: SpectralBasis) -> tuple[FluxState, FluxState]:
    """Flux states localized in the right (``+``) and left (``-``) wells."""
    if basis.modes < 2:
        raise ValueError("need at least two modes")
    psi0, psi1 = basis.wavefunctions[:, 0], basis.wavefunctions[:, 1]
    even = FluxState(basis.phi, ((psi0 + psi1) / math.sqrt(2.0)).astype(complex))
    odd = FluxState(basis.phi, ((psi0 - psi1) / math.sqrt(2.0)).astype(complex))
    if even.half_line_mass(1) > LOCALIZATION_MIN:
        plus, minus = even, odd
    elif odd.half_line_mass(1) > LOCALIZATION_MIN:
        plus, minus = odd, even
    else:
        raise TwoLevelRegimeError("two-level regime invalid: no combination localizes")
    if minus.half_line_mass(-1) <= LOCALIZATION_MIN:
        raise TwoLevelRegimeError("two-level regime invalid: left state not localized")
    return plus, minus


class FluxDynamics:
    """Flux-sign correlation tables from spectral propagation.

    Implements the same table interface as :class:`tbilab.two_level.SpinDynamics`
    with ``|X| = 1``.  ``period`` is twice the tunneling period, the period
    of the equivalent two-level rotation.
    """

    magnitude = FLUX_MAGNITUDE

    def __init__(self, basis: SpectralBasis, modes: int | None = None, leak_tol: float = 1e-3):
        modes = modes or min(basis.modes, DEFAULT_MODES)
        basis = basis.truncated(modes)
        self.basis = basis
        self.leak_tol = leak_tol
        self.marginal_atol = leak_tol
        plus, minus = localized_states(basis)
        self.localization = plus.half_line_mass(1)
        psi, dphi = basis.wavefunctions, basis.dphi
        self._rates = (basis.energies - basis.energies[0]) / HBAR
        self._initial = {1: plus.coefficients(basis), -1: minus.coefficients(basis)}
        self._filter = {}
        self._weight = {}
        for s in SIGNS:
            w = half_line_weights(basis.phi, s)
            self._filter[s] = psi.T @ (w[:, None] * psi) * dphi
            self._weight[s] = psi.T @ ((w * w)[:, None] * psi) * dphi

    @property
    def tunnel_period(self) -> float:
        return self.basis.tunnel_period

    @property
    def period(self) -> float:
        return 2.0 * self.tunnel_period

    @property
    def equivalent_rabi(self) -> RabiParams:
        return RabiParams(math.pi / self.tunnel_period)

    def _phases(self, t):
        return np.exp(-1j * np.multiply.outer(t, self._rates))

    @staticmethod
    def _quadratic(c, matrix):
        return np.einsum("...m,mn,...n->...", c.conj(), matrix, c).real

    def table(self, t_ab, t_bc) -> CorrelationTable:
        if np.any(np.asarray(t_ab) < 0) or np.any(np.asarray(t_bc) < 0):
            raise ValueError("time intervals must be non-negative")
        t_ab, t_bc = np.broadcast_arrays(np.asarray(t_ab, float), np.asarray(t_bc, float))
        shape = t_ab.shape
        phase_bc = self._phases(t_bc)
        p_ab = np.empty((2, 2) + shape)
        p_ac = np.empty((2, 2) + shape)
        p_bc = np.empty((2, 2, 2) + shape)
        for a in SIGNS:
            ia = sign_index(a)
            at_b = self._initial[a] * self._phases(t_ab)
            at_c = self._initial[a] * self._phases(t_ab + t_bc)
            before = self._quadratic(at_b, np.eye(self.basis.modes))
            for b in SIGNS:
                ib = sign_index(b)
                p_ab[ia, ib] = self._quadratic(at_b, self._weight[b])
                kept = at_b @ self._filter[b]
                leak = p_ab[ia, ib] - np.sum(np.abs(kept) ** 2, axis=-1)
                worst = float(np.max(leak / before))
                if worst > self.leak_tol:
                    raise BasisTruncationError(
                        f"basis truncation: projection leaks {worst:.2e} of the norm "
                        f"outside {self.basis.modes} modes; use more modes"
                    )
                later = kept * phase_bc
                for c in SIGNS:
                    p_bc[ia, ib, sign_index(c)] = self._quadratic(later, self._weight[c])
            for c in SIGNS:
                p_ac[ia, sign_index(c)] = self._quadratic(at_c, self._weight[c])
        return CorrelationTable(t_ab, t_bc, p_ab, p_ac, p_bc)


def flux_sign_probability(
    basis: SpectralBasis,
    prep: int,
    t_ab: float,
    mid: int,
    t_bc: float | None = None,
    fin: int | None = None,
    modes: int = DEFAULT_MODES,
) -> float:
    """Probability of flux sign ``mid`` after ``t_ab``, or the joint probability
    of ``mid`` and then ``fin`` after a further ``t_bc``."""
    table = FluxDynamics(basis, modes).table(t_ab, 0.0 if t_bc is None else t_bc)
    if fin is None:
        return float(table.ab(prep, mid))
    return float(table.bc(prep, mid, fin))


def two_level_consistency(
    basis: SpectralBasis,
    n: int = 32,
    modes: int = DEFAULT_MODES,
    times: tuple[np.ndarray, np.ndarray] | None = None,
) -> float:
    """Largest deviation of any flux correlation probability from the
    two-level formulas with ``Omega = pi / tau_phi``.

    The default grid is the ``n x n`` midpoint grid over one period of the
    equivalent two-level rotation.
    """
    dynamics = FluxDynamics(basis, modes)
    if times is None:
        t = (np.arange(n) + 0.5) * (dynamics.period / n)
        t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
    else:
        t_ab, t_bc = times
    flux = dynamics.table(t_ab, t_bc)
    spin = spin_closed_form(flux.t_ab, flux.t_bc, dynamics.equivalent_rabi)
    return float(max(
        np.max(np.abs(flux.p_ab - spin.p_ab)),
        np.max(np.abs(flux.p_ac - spin.p_ac)),
        np.max(np.abs(flux.p_bc - spin.p_bc)),
    ))
