import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from tbilab.errors import UnsupportedInequalityError
from tbilab.inequalities import (
    CANONICAL_SIGNS,
    InequalityType,
    SignAssignment,
    delta_p,
    delta_p_from_joint,
    midpoint_times,
    pseudo_joint,
    violation_grid,
    violation_map,
)
from tbilab.two_level import RabiParams, SpinDynamics

I, II, III = InequalityType.I, InequalityType.II, InequalityType.III

# Brute-force scalar sweep of the closed-form type-I excess for signs (+,-,-)
# over the 256 x 256 midpoint grid of one period (Omega = 1).
POSITIVE_CELLS_256 = 20872
POSITIVE_PART_256 = 0.04513740951644835
GRID_MAX_256 = 0.3331225462701435
# Continuous maximum from Nelder-Mead on the closed form: 1/3 at x = y = 0.61548.
CONTINUOUS_MAX = 1.0 / 3.0
CONTINUOUS_ARGMAX = 0.6154797


def closed_form_delta_i(x, y):
    return math.sin(x + y) ** 2 - math.sin(x) ** 2 - math.cos(x) ** 2 * math.sin(y) ** 2


def test_sign_assignments_enumeration():
    all_signs = SignAssignment.all()
    assert len(set(all_signs)) == 8
    assert [str(s) for s in all_signs] == ["+++", "++-", "+-+", "+--", "-++", "-+-", "--+", "---"]
    assert SignAssignment.parse("+--") == CANONICAL_SIGNS
    with pytest.raises(ValueError):
        SignAssignment.parse("+-0")


def test_inequality_type_parse():
    assert InequalityType.parse("ii") is II
    with pytest.raises(ValueError):
        InequalityType.parse("IV")


class TestDeltaP:
    def test_violation_at_quarter(self, spin):
        q = math.pi / 4
        assert delta_p(I, CANONICAL_SIGNS, q, q, spin) == pytest.approx(0.25, abs=1e-12)

    def test_no_violation_at_third(self, spin):
        th = math.pi / 3
        assert delta_p(I, CANONICAL_SIGNS, th, th, spin) == pytest.approx(-0.1875, abs=1e-12)

    @pytest.mark.parametrize("signs", SignAssignment.all(), ids=str)
    def test_frozen_dynamics_never_violates(self, frozen, signs):
        for kind in (I, II):
            assert delta_p(kind, signs, 0.7, 1.3, frozen) <= 0

    def test_type_iii_rejected(self, spin):
        with pytest.raises(UnsupportedInequalityError, match="definite state"):
            delta_p(III, CANONICAL_SIGNS, 0.1, 0.1, spin)
        with pytest.raises(UnsupportedInequalityError):
            violation_grid("III", CANONICAL_SIGNS, spin, 4)

    @given(st.sampled_from(SignAssignment.all()), st.sampled_from([I, II]),
           st.floats(0, 20), st.floats(0, 20))
    def test_global_sign_flip(self, signs, kind, t1, t2):
        dyn = SpinDynamics(RabiParams(1.0))
        assert delta_p(kind, signs, t1, t2, dyn) == pytest.approx(
            delta_p(kind, signs.flipped(), t1, t2, dyn), abs=1e-12)

    def test_closed_form_and_propagation_agree(self, rng):
        t1, t2 = rng.uniform(0, 10, (2, 100))
        prop = SpinDynamics(RabiParams(1.0))
        exact = SpinDynamics(RabiParams(1.0), closed_form=True)
        for signs in SignAssignment.all():
            for kind in (I, II):
                assert np.allclose(delta_p(kind, signs, t1, t2, prop),
                                   delta_p(kind, signs, t1, t2, exact), atol=1e-12)


class TestRealistBound:
    """Any genuine three-time distribution satisfies both inequalities."""

    def test_random_distributions(self, rng):
        joint = rng.dirichlet(np.ones(8), size=100_000).reshape(-1, 2, 2, 2)
        for signs in SignAssignment.all():
            for kind in (I, II):
                assert delta_p_from_joint(kind, signs, joint).max() <= 1e-15

    def test_definite_preparation(self, rng):
        joint = np.zeros((20_000, 2, 2, 2))
        joint[:, 0] = rng.dirichlet(np.ones(4), size=20_000).reshape(-1, 2, 2)
        for kind in (I, II):
            assert delta_p_from_joint(kind, CANONICAL_SIGNS, joint).max() <= 1e-15

    def test_quantum_marginals_are_not_a_distribution(self, spin):
        q = math.pi / 4
        assert delta_p(I, CANONICAL_SIGNS, q, q, spin) > 0


class TestViolationMap:
    def test_cell_count_and_order(self, spin):
        cells = violation_map(I, CANONICAL_SIGNS, spin, n=4)
        assert len(cells) == 16
        keys = [(c.t_ab, c.t_bc) for c in cells]
        assert keys == sorted(keys)

    def test_quarter_cell_uncertainties(self, spin):
        # n = 4 midpoints sit at odd multiples of pi/4
        cell = violation_map(I, CANONICAL_SIGNS, spin, n=4)[0]
        assert cell.t_ab == pytest.approx(math.pi / 4)
        assert cell.delta_p == pytest.approx(0.25, abs=1e-12)
        assert (cell.dx_ab, cell.dx_ac, cell.dx_bc) == pytest.approx((math.sqrt(2), 0.0, 1.0), abs=1e-12)

    def test_brute_force_fraction_and_integral(self, spin):
        grid = violation_grid(I, CANONICAL_SIGNS, spin, 256)
        assert int((grid.delta_p > 0).sum()) == POSITIVE_CELLS_256
        assert np.where(grid.delta_p > 0, grid.delta_p, 0).mean() == pytest.approx(POSITIVE_PART_256, abs=1e-14)

    def test_scalar_sweep_spot_check(self, spin):
        grid = violation_grid(I, CANONICAL_SIGNS, spin, 256)
        t = midpoint_times(256, 2 * math.pi)
        for i, j in [(0, 0), (24, 25), (100, 3), (255, 255), (128, 64)]:
            assert grid.delta_p[i, j] == pytest.approx(closed_form_delta_i(t[i], t[j]), abs=1e-12)

    def test_maximum(self, spin):
        grid = violation_grid(I, CANONICAL_SIGNS, spin, 256)
        assert grid.delta_p.max() == pytest.approx(GRID_MAX_256, abs=1e-12)
        assert grid.delta_p.max() == pytest.approx(CONTINUOUS_MAX, abs=1e-3)
        # maximum is attained at ~0.6 rad (and at its mirror image 2 pi - 0.6)
        i, j = np.unravel_index(np.argmax(grid.delta_p[:128, :128]), (128, 128))
        assert grid.delta_p[i, j] == pytest.approx(GRID_MAX_256, abs=1e-12)
        assert grid.t_ab[i] == pytest.approx(CONTINUOUS_ARGMAX, abs=0.03)
        assert grid.t_bc[j] == pytest.approx(CONTINUOUS_ARGMAX, abs=0.03)

    def test_frozen_dynamics(self, frozen):
        grid = violation_grid(I, CANONICAL_SIGNS, frozen, 16)
        assert not np.any(grid.delta_p > 0)

    def test_ranges(self, spin):
        for kind in (I, II):
            for signs in SignAssignment.all():
                g = violation_grid(kind, signs, spin, 32)
                assert g.delta_p.min() >= -2 and g.delta_p.max() <= 1
                for dx in (g.dx_ab, g.dx_ac, g.dx_bc):
                    assert dx.min() >= 0 and dx.max() <= 2 + 1e-12

    def test_uncertainties_in_units_of_magnitude(self):
        small = violation_grid(I, CANONICAL_SIGNS, SpinDynamics(RabiParams(1.0), magnitude=0.5), 16)
        large = violation_grid(I, CANONICAL_SIGNS, SpinDynamics(RabiParams(1.0), magnitude=7.0), 16)
        assert np.allclose(small.max_dx, large.max_dx, atol=1e-12)

    def test_midpoint_validation(self):
        with pytest.raises(ValueError):
            midpoint_times(1, 1.0)
        with pytest.raises(ValueError):
            midpoint_times(4, math.inf)


class TestPseudoJoint:
    def test_quarter_example(self, spin):
        q = math.pi / 4
        pj = pseudo_joint(1, q, q, 1, spin)
        assert [pj.at(1, 1), pj.at(1, -1), pj.at(-1, 1), pj.at(-1, -1)] == pytest.approx(
            [0.25, 0.25, -0.25, 0.75], abs=1e-12)
        assert pj.at(-1, 1) == pytest.approx(-delta_p(I, CANONICAL_SIGNS, q, q, spin), abs=1e-12)

    def test_third_example(self, spin):
        th = math.pi / 3
        pj = pseudo_joint(1, th, th, 1, spin)
        assert pj.q.ravel() == pytest.approx([0.0625, 0.1875, 0.1875, 0.5625], abs=1e-12)
        assert pj.q.min() >= 0

    @pytest.mark.parametrize("t_ab", [0.0, 0.4, 1.9, 3.3])
    def test_immediate_remeasurement(self, spin, t_ab):
        pj = pseudo_joint(1, t_ab, 0.0, 1, spin)
        assert pj.at(1, 1) == pytest.approx(math.cos(t_ab) ** 2, abs=1e-12)
        assert pj.at(-1, -1) == pytest.approx(math.sin(t_ab) ** 2, abs=1e-12)
        assert pj.at(1, -1) == pytest.approx(0, abs=1e-12)
        assert pj.at(-1, 1) == pytest.approx(0, abs=1e-12)

    def test_marginals_on_grid(self, spin):
        t = midpoint_times(64, spin.period)
        t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
        table = spin.table(t_ab, t_bc)
        for prep in (1, -1):
            for ref in (1, -1):
                pj = pseudo_joint(prep, t_ab, t_bc, ref, spin)
                assert pj.marginal_defect(table) < 1e-10

    def test_general_identity(self, spin):
        t = midpoint_times(64, spin.period)
        t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
        for s in SignAssignment.all():
            pj = pseudo_joint(s.s_a, t_ab, t_bc, -s.s_b, spin)
            dp = delta_p(I, s, t_ab, t_bc, spin)
            assert np.max(np.abs(dp + pj.at(s.s_b, -s.s_c))) < 1e-12

    def test_negativity_wherever_violated(self, spin):
        t = midpoint_times(256, spin.period)
        t_ab, t_bc = np.meshgrid(t, t, indexing="ij")
        dp = delta_p(I, CANONICAL_SIGNS, t_ab, t_bc, spin)
        pj = pseudo_joint(1, t_ab, t_bc, 1, spin)
        assert np.all(pj.min_entry[dp > 0] < 0)
        assert np.max(np.abs(dp + pj.at(-1, 1))) < 1e-12
