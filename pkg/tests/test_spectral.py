import math

import numpy as np
import pytest
import sympy as sp

from splinewidth.functions import periodic_eigenfunction
from splinewidth.knots import make_breaks
from splinewidth.linalg import gen_sym_eig
from splinewidth.projection import error_norm, gram_matrix, l2_project
from splinewidth.spaces import ConstraintFamily, build_subspace, periodic_space
from splinewidth.spectral import (SpectrumError, branch_profile, conjecture_explorer, count_branches,
                                  exact_periodic_eigenvalues, galerkin_eigfunction_error, inverse_report,
                                  laplace_spectrum, moving_median, outlier_report, periodic_space_smoothness)

FAMILIES = ("periodic", "even_zero", "odd_zero", "mixed", "reduced_odd")


def _family(tag):
    return ConstraintFamily.periodic() if tag == "periodic" else ConstraintFamily(tag)


class TestLaplaceSpectrum:
    def test_two_by_two_symbolic(self):
        # periodic hats on two intervals: phi_0 peaks at 0 (= 1), phi_1 at 1/2
        x, nu = sp.symbols("x nu")
        half = sp.Rational(1, 2)
        phi0 = sp.Piecewise((1 - 2 * x, x <= half), (2 * x - 1, True))
        phi1 = 1 - phi0
        basis = [phi0, phi1]
        M = sp.Matrix(2, 2, lambda i, j: sp.integrate(basis[i] * basis[j], (x, 0, 1)))
        K = sp.Matrix(2, 2, lambda i, j: sp.integrate(sp.diff(basis[i], x) * sp.diff(basis[j], x), (x, 0, 1)))
        want = sorted(float(r) for r in sp.solve((K - nu * M).det(), nu))
        space = periodic_space_smoothness(make_breaks("uniform", n=2), 1, 0)
        assert space.dim == 2
        np.testing.assert_allclose(laplace_spectrum(space).nu_h, want, atol=1e-12)
        np.testing.assert_allclose(want, [0.0, 48.0])

    @pytest.mark.parametrize("p,k", [(2, 0), (3, 1), (5, 4)])
    def test_constant_mode(self, p, k):
        br = make_breaks("random_perturbed", n=9, amplitude=0.02, seed=p)
        spec = laplace_spectrum(periodic_space_smoothness(br, p, k))
        assert abs(spec.nu_h[0]) < 1e-9 * spec.nu_h[-1]
        assert math.isnan(spec.rel_err[0])

    def test_exact_eigenvalues(self):
        np.testing.assert_allclose(exact_periodic_eigenvalues(5), [0, 4 * np.pi ** 2, 4 * np.pi ** 2,
                                                                   16 * np.pi ** 2, 16 * np.pi ** 2])

    @pytest.mark.parametrize("n,p,k", [(10, 3, 0), (12, 4, 1), (7, 5, 2), (9, 2, 1)])
    def test_dimensions(self, n, p, k):
        br = make_breaks("uniform", n=n)
        assert periodic_space_smoothness(br, p, k).dim == n + p - k - 1
        assert periodic_space_smoothness(br, p, k, full_ck=True).dim == n * (p - k)

    @pytest.mark.parametrize("c", [0.5, 3.0])
    def test_mass_scaling(self, c):
        space = periodic_space(make_breaks("uniform", n=8), 3)
        K, M = gram_matrix(space, 1), gram_matrix(space, 0)
        np.testing.assert_allclose(gen_sym_eig(K, c * M).eigenvalues, laplace_spectrum(space).nu_h / c,
                                   rtol=1e-10, atol=1e-9)

    def test_rejects_non_periodic(self):
        with pytest.raises(SpectrumError):
            laplace_spectrum(build_subspace(make_breaks("uniform", n=4), 2))

    def test_maximal_smoothness_lower_bound(self):
        # Galerkin eigenvalues of a conforming space never undershoot
        spec = laplace_spectrum(periodic_space(make_breaks("uniform", n=20), 3))
        assert spec.rel_err[1:].min() > -1e-10


class TestOutliers:
    @pytest.mark.parametrize("p", [2, 3, 6])
    def test_maximal_smoothness_has_none(self, p):
        assert outlier_report(50, p, p - 1).count == 0

    def test_outliers_are_top_modes(self):
        rep = outlier_report(50, 6, 0, threshold=0.1)
        dim = rep.spectrum.dim
        assert rep.indices == tuple(range(dim - rep.count, dim))

    def test_count_monotone_in_threshold(self):
        counts = [outlier_report(50, 6, 0, t).count for t in (0.01, 0.1, 1.0, 10.0)]
        assert counts == sorted(counts, reverse=True)


class TestBranches:
    @pytest.mark.parametrize("n,p,k", [(20, 3, 0), (30, 3, 1), (40, 3, 2), (20, 4, 1), (60, 2, 0)])
    def test_branch_count(self, n, p, k):
        prof = branch_profile(n, p, k)
        assert prof.spectrum.dim == n * (p - k)
        assert prof.branches == p - k

    def test_moving_median(self):
        y = np.array([1.0, 1.0, 100.0, 1.0, 1.0])
        np.testing.assert_array_equal(moving_median(y, 3), [1.0] * 5)
        # the window shrinks at the ends
        assert moving_median(np.array([1.0, 100.0, 1.0]), 3)[0] == 50.5

    def test_flat_curve_has_one_branch(self):
        assert count_branches(np.full(300, 1e-3), 100)[0] == 1

    def test_shifted_dip_not_counted(self):
        y = np.full(300, 1e-2)
        y[149] = 1e-6  # far from multiples of n = 100
        assert count_branches(y, 100)[0] == 1


class TestEigenfunctions:
    def test_constant_mode_exact(self):
        space = periodic_space(make_breaks("uniform", n=10), 3)
        assert galerkin_eigfunction_error(space, 0).distance < 1e-12

    @pytest.mark.parametrize("p", [3, 4, 5, 6])
    def test_first_pair_angle_is_best_approximation(self, p):
        # on uniform periodic breaks the discrete pair is the L2 projection of the exact pair,
        # so the angle sine equals the relative best-approximation error of psi_1
        space = periodic_space(make_breaks("uniform", n=20), p)
        res = galerkin_eigfunction_error(space, 1)
        u = periodic_eigenfunction(1)
        assert res.kind == "pair" and res.cluster_ok
        assert res.distance == pytest.approx(error_norm(u, l2_project(space, u)), rel=1e-6)

    @pytest.mark.parametrize("p", [4, 5, 6])
    def test_first_pair_angle_small(self, p):
        res = galerkin_eigfunction_error(periodic_space(make_breaks("uniform", n=20), p), 1)
        assert res.distance < 1e-6

    def test_pair_beyond_dimension(self):
        with pytest.raises(SpectrumError):
            galerkin_eigfunction_error(periodic_space(make_breaks("uniform", n=4), 2), 5)


class TestConjecture:
    def test_piecewise_constants_orthogonal(self):
        rep = conjecture_explorer(3, 0, [0, 1])
        assert rep.constants_orthogonal < 1e-15
        assert max(v for _, v in rep.parity_inner_products) < 1e-14

    def test_error_table_decreasing(self):
        rep = conjecture_explorer(5, 0, range(2, 10))
        errs = [r.error for r in rep.rows]
        assert all(b < a for a, b in zip(errs, errs[1:]))


class TestInverse:
    def test_base_case_attains_three(self):
        space = build_subspace(make_breaks("explicit", points=[-1.0, 1.0]), 1)
        rep = inverse_report(space)
        assert rep.ratio ** 2 == pytest.approx(3.0, abs=1e-10)

    def test_periodic_linear_instance(self):
        rep = inverse_report(periodic_space(make_breaks("uniform", n=4), 1))
        assert rep.ratio ** 2 <= 12 / 0.25 ** 2 * (1 + 1e-12)

    @pytest.mark.parametrize("tag", FAMILIES)
    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5, 6])
    def test_bound_holds_on_random_breaks(self, tag, p):
        for seed in range(5):
            br = make_breaks("random_perturbed", n=7, amplitude=0.06, seed=seed)
            rep = inverse_report(build_subspace(br, p, p - 1, _family(tag)))
            assert rep.conforming and rep.holds

    def test_full_space_is_not_conforming(self):
        # boundary terms make the full space exceed the constant for p >= 2
        rep = inverse_report(build_subspace(make_breaks("uniform", n=6), 3))
        assert not rep.conforming
        assert rep.slack < 1

    def test_needs_positive_degree(self):
        with pytest.raises(SpectrumError):
            inverse_report(build_subspace(make_breaks("uniform", n=3), 0, -1))
