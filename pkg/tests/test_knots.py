import numpy as np
import pytest
from hypothesis import given, strategies as st

from splinewidth.knots import (MAX_DEGREE, BreakSequence, ExtendedKnotVector, KnotError, make_breaks,
                               make_special_breaks)


class TestBreakSequence:
    def test_uniform(self):
        br = make_breaks("uniform", n=4)
        np.testing.assert_allclose(br.points, [0, 0.25, 0.5, 0.75, 1])
        assert br.h == br.h_min == 0.25

    def test_explicit_widths(self):
        br = make_breaks("explicit", points=[0, 0.1, 0.6, 1])
        assert br.h == pytest.approx(0.5)
        assert br.h_min == pytest.approx(0.1)
        assert br.h_hat == pytest.approx(0.8)

    def test_h_hat_single_interval(self):
        # both boundary intervals are the same interval
        assert make_breaks("uniform", n=1).h_hat == 2.0

    def test_random_is_deterministic(self):
        a = make_breaks("random_perturbed", n=8, amplitude=0.02, seed=7)
        b = make_breaks("random_perturbed", n=8, amplitude=0.02, seed=7)
        assert a == b
        assert not a.is_uniform()

    @pytest.mark.parametrize("pts", [[0, 0.5, 0.5, 1], [0, 0.6, 0.4, 1], [1.0], [0, np.inf]])
    def test_rejects_bad_points(self, pts):
        with pytest.raises(KnotError):
            BreakSequence(pts)

    def test_amplitude_too_large(self):
        with pytest.raises(KnotError, match="amplitude"):
            make_breaks("random_perturbed", n=4, amplitude=0.2, seed=0)

    def test_unknown_kind(self):
        with pytest.raises(KnotError):
            make_breaks("chebyshev", n=3)

    def test_json_round_trip(self):
        br = make_breaks("random_perturbed", n=5, amplitude=0.05, seed=3)
        assert BreakSequence.from_json(br.to_json()) == br

    def test_refine(self):
        br = make_breaks("explicit", points=[0, 0.2, 1]).refine(2)
        np.testing.assert_allclose(br.points, [0, 0.1, 0.2, 0.6, 1])

    @given(st.integers(1, 30), st.floats(0, 0.49), st.integers(0, 2**31))
    def test_random_stays_ordered(self, n, frac, seed):
        br = make_breaks("random_perturbed", n=n, amplitude=frac / n, seed=seed)
        assert br.n_intervals == n
        assert br.h_min > 0
        assert br.h <= br.h_hat <= 2 * br.h


class TestSpecialBreaks:
    @pytest.mark.parametrize("p,i,n,expected", [
        (3, 0, 2, [0, 1 / 3, 2 / 3, 1]),
        (2, 1, 3, [0, 1 / 3, 2 / 3, 1]),
        (2, 2, 2, [0, 1 / 5, 3 / 5, 1]),
    ])
    def test_examples(self, p, i, n, expected):
        np.testing.assert_allclose(make_special_breaks(p, i, n).points, expected, atol=1e-15)

    @pytest.mark.parametrize("i", [0, 1, 2, 3])
    def test_invalid(self, i):
        if i == 3:
            with pytest.raises(KnotError):
                make_special_breaks(2, i, 3)
        else:
            assert make_special_breaks(2, i, 3).a == 0.0


class TestKnotVector:
    def test_multiplicities(self):
        kv = ExtendedKnotVector(make_breaks("uniform", n=3), 3, 1)
        t = kv.knots
        assert np.sum(t == 0) == 4 and np.sum(t == 1) == 4
        assert np.sum(np.isclose(t, 1 / 3)) == 2
        assert kv.dim == 3 * 2 + 2

    @pytest.mark.parametrize("p,k", [(2, 2), (2, -2), (-1, -1), (MAX_DEGREE + 1, 0)])
    def test_rejects(self, p, k):
        with pytest.raises(KnotError):
            ExtendedKnotVector(make_breaks("uniform", n=2), p, k)

    def test_raise_lower(self):
        kv = ExtendedKnotVector(make_breaks("uniform", n=3), 2, 1)
        assert kv.raised().lowered().knots.tolist() == kv.knots.tolist()
        with pytest.raises(KnotError):
            ExtendedKnotVector(kv.breaks, 0, -1).lowered()
