"""Eigenstructure, splitting, controllability, and the pressure formula."""

import numpy as np
import pytest

from invpress.errors import (
    DomainError,
    NotControllableError,
    NotEquilibriumError,
    NotHyperbolicError,
    NotInteriorError,
    NotRegularError,
)
from invpress.model import ControlRange, LinearSystem, PotentialSpec, make_builtin_system
from invpress.spectral import (
    eigen_decompose,
    equilibrium_upper_bound,
    formula_pressure,
    hyperbolic_split,
    kalman_rank,
    min_potential,
    project_points,
    project_system,
    unstable_sum,
)

U1 = ControlRange.box([-1.0], [1.0])
A_FOCUS = np.array([[1.0, -1.0], [1.0, 1.0]])
B_FOCUS = np.array([[0.0], [1.0]])


def focus_system(u0: float = 0.0) -> LinearSystem:
    rng = ControlRange.box([-1.0 + u0], [1.0 + u0], u_ref=[u0])
    return LinearSystem(A=A_FOCUS, B=B_FOCUS, U=rng)


class TestEigenDecompose:
    def test_focus_conjugate_pair(self):
        spec = eigen_decompose(A_FOCUS)
        assert sorted((ev.real, ev.imag) for ev, _ in spec.entries) == \
            [(1.0, -1.0), (1.0, 1.0)]
        assert all(m == 1 for _, m in spec.entries)

    def test_identity_multiplicity(self):
        spec = eigen_decompose(np.eye(3))
        assert spec.entries == [(1.0 + 0.0j, 3)]

    def test_diagonal_clusters(self):
        spec = eigen_decompose(np.diag([2.0, 2.0, -5.0]))
        assert {(ev.real, m) for ev, m in spec.entries} == {(2.0, 2), (-5.0, 1)}

    def test_rejects_nonsquare(self):
        with pytest.raises(DomainError):
            eigen_decompose(np.ones((2, 3)))


class TestUnstableSum:
    def test_focus(self):
        assert unstable_sum(eigen_decompose(A_FOCUS)) == pytest.approx(2.0, abs=1e-12)

    def test_hurwitz_is_zero(self):
        assert unstable_sum(eigen_decompose(np.diag([-1.0, -3.0]))) == 0.0

    def test_mixed_signs(self):
        assert unstable_sum(eigen_decompose(np.diag([3.0, -1.0, 2.0]))) == 5.0

    def test_similarity_invariance(self):
        rng = np.random.default_rng(0)
        for _ in range(5):
            a = rng.normal(size=(3, 3))
            t = np.eye(3) + 0.3 * rng.normal(size=(3, 3))
            sim = t @ a @ np.linalg.inv(t)
            assert unstable_sum(eigen_decompose(sim)) == pytest.approx(
                unstable_sum(eigen_decompose(a)), abs=1e-6)


class TestHyperbolicSplit:
    def test_saddle(self):
        split = hyperbolic_split(np.diag([1.0, -1.0]))
        np.testing.assert_allclose(split.projection, np.diag([1.0, 0.0]), atol=1e-12)
        assert split.unstable_dim == 1
        np.testing.assert_allclose(np.abs(split.unstable_basis.ravel()), [1.0, 0.0],
                                   atol=1e-12)

    def test_focus_fully_unstable(self):
        split = hyperbolic_split(A_FOCUS)
        assert split.unstable_dim == 2
        np.testing.assert_allclose(split.projection, np.eye(2), atol=1e-12)

    def test_rotation_not_hyperbolic(self):
        with pytest.raises(NotHyperbolicError):
            hyperbolic_split(np.array([[0.0, 1.0], [-1.0, 0.0]]))

    def test_hurwitz_trivial_unstable(self):
        split = hyperbolic_split(np.diag([-2.0, -3.0]))
        assert split.unstable_dim == 0
        np.testing.assert_allclose(split.projection, np.zeros((2, 2)), atol=1e-12)

    def test_projection_invariants(self):
        rng = np.random.default_rng(4)
        for _ in range(6):
            a = rng.normal(size=(4, 4))
            if min(abs(ev.real) for ev in np.linalg.eigvals(a)) < 1e-3:
                continue
            split = hyperbolic_split(a)
            p = split.projection
            assert np.max(np.abs(p @ p - p)) <= 1e-10 * (1 + np.linalg.norm(a))
            assert np.max(np.abs(p @ a - a @ p)) <= 1e-9 * (1 + np.linalg.norm(a))
            assert np.linalg.matrix_rank(p) == split.unstable_dim
            assert split.stable_dim + split.unstable_dim == 4


class TestKalman:
    def test_focus_controllable(self):
        assert kalman_rank(A_FOCUS, B_FOCUS) == (2, True)

    def test_zero_input_map(self):
        assert kalman_rank(A_FOCUS, np.zeros((2, 1))) == (0, False)

    def test_diagonal_with_shared_input(self):
        # det [B, AB] = 1*2 - 1*1 = 1, so controllable
        assert kalman_rank(np.diag([1.0, 2.0]), np.array([[1.0], [1.0]]))[1]

    def test_uncontrollable_decoupled(self):
        assert not kalman_rank(np.diag([1.0, 2.0]), np.array([[1.0], [0.0]]))[1]


class TestMinPotential:
    def test_norm_dist_reference_inside(self):
        u0 = np.array([0.25])
        rng = ControlRange.box([-1.0 + 0.25], [1.0 + 0.25])
        f = PotentialSpec.norm_dist(u0, p=1)
        arg, val = min_potential(f, rng)
        np.testing.assert_allclose(arg, u0)
        assert val == 0.0

    def test_constant(self):
        _, val = min_potential(PotentialSpec.constant(2.0), U1)
        assert val == 2.0

    def test_affine_on_interval(self):
        arg, val = min_potential(PotentialSpec.affine([1.0], b=0.0), U1)
        assert arg[0] == -1.0 and val == -1.0

    def test_norm_dist_projection_onto_box(self):
        f = PotentialSpec.norm_dist([2.0, 0.5], p=2)
        rng = ControlRange.box([-1.0, -1.0], [1.0, 1.0])
        arg, val = min_potential(f, rng)
        np.testing.assert_allclose(arg, [1.0, 0.5])
        assert val == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("p", [1, 2, float("inf")])
    def test_norm_dist_projection_onto_hull_vs_grid_oracle(self, p):
        verts = np.array([[0.0, 0.0], [2.0, 0.0], [0.0, 2.0]])
        rng = ControlRange.hull(verts)
        f = PotentialSpec.norm_dist([2.0, 2.0], p=p)
        _, val = min_potential(f, rng)
        # dense barycentric grid oracle
        best = np.inf
        for a in np.linspace(0, 1, 201):
            for b in np.linspace(0, 1 - a, max(2, int(201 * (1 - a)) + 1)):
                u = a * verts[1] + b * verts[2]
                best = min(best, f.value(u))
        assert val == pytest.approx(best, abs=2e-3)
        assert val <= best + 1e-12

    def test_affine_on_hull_vertex(self):
        rng = ControlRange.hull([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
        arg, val = min_potential(PotentialSpec.affine([-1.0, -1.0]), rng)
        assert val == -1.0
        assert tuple(arg) in {(1.0, 0.0), (0.0, 1.0)}


class TestFormulaPressure:
    def test_focus_value(self):
        sys_ = focus_system()
        f = PotentialSpec.norm_dist([0.0], p=1)
        assert formula_pressure(sys_, f) == pytest.approx(2.0, abs=1e-12)

    def test_scalar_benchmark(self):
        sys_ = LinearSystem(A=[[1.0]], B=[[1.0]], U=U1)
        assert formula_pressure(sys_, PotentialSpec.constant(0.0)) == 1.0

    def test_constant_shift_exact(self):
        sys_ = LinearSystem(A=[[1.0]], B=[[1.0]], U=U1)
        for c in (-1.0, 0.3, 2.0):
            assert formula_pressure(sys_, PotentialSpec.constant(c)) == 1.0 + c

    def test_shift_property_any_potential(self):
        sys_ = focus_system()
        f = PotentialSpec.norm_dist([0.0], p=1)
        for c in (-0.7, 0.25, 3.0):
            assert formula_pressure(sys_, f.shifted(c)) == \
                formula_pressure(sys_, f) + c

    def test_ordering_in_potential(self):
        sys_ = focus_system()
        f = PotentialSpec.norm_dist([0.0], p=1)   # f(u) = |u| <= 1 on U
        g = PotentialSpec.constant(1.0)
        grid = sys_.U.grid(9)
        assert all(f.value(u) <= g.value(u) for u in grid)
        assert formula_pressure(sys_, f) <= formula_pressure(sys_, g)

    def test_not_controllable(self):
        sys_ = LinearSystem(A=np.diag([1.0, 2.0]), B=[[1.0], [0.0]], U=U1)
        with pytest.raises(NotControllableError):
            formula_pressure(sys_, PotentialSpec.constant(0.0))

    def test_not_hyperbolic(self):
        sys_ = LinearSystem(A=[[0.0, 1.0], [-1.0, 0.0]], B=[[0.0], [1.0]], U=U1)
        with pytest.raises(NotHyperbolicError):
            formula_pressure(sys_, PotentialSpec.constant(0.0))

    def test_zero_not_interior(self):
        rng = ControlRange.box([1.0], [2.0])
        sys_ = LinearSystem(A=[[1.0]], B=[[1.0]], U=rng)
        with pytest.raises(NotInteriorError):
            formula_pressure(sys_, PotentialSpec.constant(0.0))


class TestEquilibriumUpperBound:
    def test_linear_at_origin(self):
        sys_ = focus_system()
        f = PotentialSpec.norm_dist([0.0], p=1)
        val = equilibrium_upper_bound(sys_, [0.0, 0.0], [0.0], f)
        assert val == pytest.approx(unstable_sum(eigen_decompose(A_FOCUS)), abs=1e-12)

    def test_focus_interior_equilibrium(self):
        # x0 solves A x + B u0 = 0 by a 2x2 solve
        sys_ = focus_system(u0=0.0)
        f = PotentialSpec.norm_dist([0.0], p=1)
        u0 = np.array([0.4])
        x0 = np.linalg.solve(A_FOCUS, -B_FOCUS @ u0)
        val = equilibrium_upper_bound(sys_, x0, u0, f)
        assert val == pytest.approx(2.0 + 0.4, abs=1e-9)

    def test_not_equilibrium(self):
        sys_ = focus_system()
        with pytest.raises(NotEquilibriumError):
            equilibrium_upper_bound(sys_, [1.0, 1.0], [0.0],
                                    PotentialSpec.constant(0.0))

    def test_boundary_u0_rejected(self):
        sys_ = focus_system()
        x0 = np.linalg.solve(A_FOCUS, -B_FOCUS @ np.array([1.0]))
        with pytest.raises(NotInteriorError):
            equilibrium_upper_bound(sys_, x0, [1.0], PotentialSpec.constant(0.0))

    def test_not_regular(self):
        sys_ = LinearSystem(A=np.diag([1.0, 2.0]), B=[[1.0], [0.0]], U=U1)
        with pytest.raises(NotRegularError):
            equilibrium_upper_bound(sys_, [0.0, 0.0], [0.0],
                                    PotentialSpec.constant(0.0))

    def test_nonlinear_equilibrium(self):
        sys_ = make_builtin_system("vanderpol", U1)
        u0 = np.array([0.3])
        x0 = np.array([0.3, 0.0])
        f = PotentialSpec.norm_dist([0.0], p=1)
        val = equilibrium_upper_bound(sys_, x0, u0, f)
        jac = np.array([[0.0, 1.0], [-1.0, 1.0 - 0.3 ** 2]])
        expected = unstable_sum(eigen_decompose(jac)) + 0.3
        assert val == pytest.approx(expected, abs=1e-6)


class TestProjectSystem:
    def test_saddle_projection(self):
        u2 = ControlRange.box([-1.0, -1.0], [1.0, 1.0])
        sys_ = LinearSystem(A=np.diag([1.0, -1.0]), B=np.eye(2), U=u2)
        split = hyperbolic_split(sys_.A)
        proj = project_system(sys_, split)
        assert proj.dim == 1
        assert proj.A[0, 0] == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(np.abs(proj.B), [[1.0, 0.0]], atol=1e-12)

    def test_focus_projection_is_similarity(self):
        sys_ = focus_system()
        split = hyperbolic_split(sys_.A)
        proj = project_system(sys_, split)
        assert proj.dim == 2
        assert np.trace(proj.A) == pytest.approx(2.0, abs=1e-10)
        assert sorted(np.linalg.eigvals(proj.A).imag) == pytest.approx([-1.0, 1.0],
                                                                       abs=1e-10)

    def test_unstable_trace_equals_unstable_sum(self):
        rng = np.random.default_rng(9)
        for _ in range(5):
            stable = -np.abs(rng.normal(size=2)) - 0.5
            unstable = np.abs(rng.normal(size=2)) + 0.5
            t = np.eye(4) + 0.2 * rng.normal(size=(4, 4))
            a = t @ np.diag(np.concatenate([unstable, stable])) @ np.linalg.inv(t)
            u4 = ControlRange.box([-1.0], [1.0])
            sys_ = LinearSystem(A=a, B=rng.normal(size=(4, 1)), U=u4)
            split = hyperbolic_split(a)
            proj = project_system(sys_, split)
            assert np.trace(proj.A) == pytest.approx(
                unstable_sum(eigen_decompose(a)), abs=1e-6)

    def test_projected_points_shape(self):
        split = hyperbolic_split(np.diag([1.0, -1.0]))
        pts = project_points(split, np.array([[2.0, 3.0], [1.0, -1.0]]))
        np.testing.assert_allclose(pts, [[2.0], [1.0]], atol=1e-12)

    def test_trivial_unstable_raises(self):
        sys_ = LinearSystem(A=np.diag([-1.0, -2.0]), B=np.ones((2, 1)), U=U1)
        split = hyperbolic_split(sys_.A)
        with pytest.raises(DomainError):
            project_system(sys_, split)
