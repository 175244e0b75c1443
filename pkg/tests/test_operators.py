import numpy as np
import pytest

from splinewidth.knots import make_breaks
from splinewidth.operators import (MAX_GRID, MIN_GRID, FunctionClassSpec, KernelOperator, OperatorError,
                                   OperatorWord, alternating_word, discretize_operator, make_grid,
                                   weighted_adjoint)


def _kernel_quadrature(op, x, f, a=0.0, b=1.0, m=60):
    """int K(x, y) f(y) dy with the kernel jump at y = x handled by splitting."""
    out = []
    g, w = np.polynomial.legendre.leggauss(m)
    for xi in x:
        total = 0.0
        for lo, hi in ((a, xi), (xi, b)):
            if hi <= lo:
                continue
            y = 0.5 * (hi - lo) * (g + 1) + lo
            total += 0.5 * (hi - lo) * np.sum(w * op.kernel(xi, y, a, b) * f(y))
        out.append(total)
    return np.array(out)


class TestGrid:
    def test_size_and_alignment(self):
        br = make_breaks("random_perturbed", n=7, amplitude=0.03, seed=0)
        g = make_grid(br, 1000)
        assert g.size >= 1000
        assert g.w.sum() == pytest.approx(1.0, abs=1e-14)
        assert g.refined().size == 2 * g.size

    @pytest.mark.parametrize("M", [MIN_GRID - 1, MAX_GRID + 1])
    def test_bounds(self, M):
        with pytest.raises(OperatorError):
            make_grid(make_breaks("uniform", n=1), M)

    def test_left_integration_exact(self):
        g = make_grid(make_breaks("uniform", n=1), 600)
        np.testing.assert_allclose(g.left_integration @ np.ones(g.size), g.x, atol=1e-12)
        np.testing.assert_allclose(g.left_integration @ g.x ** 5, g.x ** 6 / 6, atol=1e-13)


class TestKernels:
    def test_periodic_kills_constants(self):
        g, A = discretize_operator(KernelOperator("periodic"), 1000)
        assert np.abs(A @ np.ones(g.size)).max() < 1e-13

    def test_periodic_cosine(self):
        g, A = discretize_operator(KernelOperator("periodic"), 2000)
        out = A @ np.cos(2 * np.pi * g.x)
        assert np.abs(out - np.sin(2 * np.pi * g.x) / (2 * np.pi)).max() <= 1e-8

    @pytest.mark.parametrize("kind", ["left", "right", "periodic", "neumann"])
    @pytest.mark.parametrize("adjoint", [False, True])
    def test_matrix_matches_kernel_quadrature(self, kind, adjoint):
        op = KernelOperator(kind, adjoint=adjoint)
        g, A = discretize_operator(op, 800)
        f = lambda y: np.exp(y) * np.cos(3 * y)  # noqa: E731
        idx = np.arange(0, g.size, 97)
        np.testing.assert_allclose((A @ f(g.x))[idx], _kernel_quadrature(op, g.x[idx], f), atol=1e-12)

    def test_right_is_adjoint_of_left(self):
        g = make_grid(make_breaks("uniform", n=1), 500)
        L = KernelOperator("left").base_matrix(g)
        R = KernelOperator("right").base_matrix(g)
        np.testing.assert_allclose(weighted_adjoint(L, g.w), R, atol=1e-13)

    def test_adjoint_identity(self, rng):
        g = make_grid(make_breaks("random_perturbed", n=4, amplitude=0.05, seed=1), 600)
        A = KernelOperator("neumann").matrix(g)
        As = KernelOperator("neumann", adjoint=True).matrix(g)
        f, h = rng.standard_normal((2, g.size))
        assert g.inner(A @ f, h) == pytest.approx(g.inner(f, As @ h), rel=1e-12)

    def test_power(self):
        g = make_grid(make_breaks("uniform", n=1), 500)
        A2 = KernelOperator("left", 2).matrix(g)
        np.testing.assert_allclose(A2 @ np.ones(g.size), g.x ** 2 / 2, atol=1e-13)

    def test_neumann_range_mean_free(self, rng):
        g, A = discretize_operator(KernelOperator("neumann"), 700)
        assert abs(g.w @ (A @ rng.standard_normal(g.size))) < 1e-13

    @pytest.mark.parametrize("kind,power", [("dirichlet", 1), ("left", 0)])
    def test_rejects(self, kind, power):
        with pytest.raises(OperatorError):
            KernelOperator(kind, power)


class TestWords:
    def test_alternating(self):
        w = alternating_word("neumann", 3, start_adjoint=True)
        assert [f.adjoint for f in w.factors] == [True, False, True]
        assert len(w) == 3

    def test_word_matrix_order(self):
        g = make_grid(make_breaks("uniform", n=1), 500)
        L, R = KernelOperator("left"), KernelOperator("right")
        W = OperatorWord((L, R)).matrix(g)
        np.testing.assert_allclose(W, L.matrix(g) @ R.matrix(g), atol=1e-14)

    @pytest.mark.parametrize("tag,deg", [("A_r_per", 0), ("A_r_full", 2), ("A_r_0", None), ("A_r_1", 0),
                                         ("A_r_2", None)])
    def test_class_shift(self, tag, deg):
        cls = FunctionClassSpec(tag, 3)
        assert cls.affine_degree == deg
        assert len(cls.word) in (1, 3)

    def test_unknown_class(self):
        with pytest.raises(OperatorError):
            FunctionClassSpec("A_r_3", 1)
