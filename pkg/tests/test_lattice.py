"""LLL reduction, shortest-vector enumeration, dual bases and successive minima."""

import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifstbc.channel import effective_channel, sample_channel, substream
from ifstbc.designs import code_matrix, make_design
from ifstbc.lattice import (LatticeBasis, LatticeError, dual_basis, enumerate_ball, int_det,
                            is_lll_reduced, lll_reduce, lll_reduce_batch, successive_minima,
                            successive_minima_check, svp_enumerate)


def brute_vectors(B, r2):
    """All nonzero (d, ||dB||^2) with ||dB||^2 <= r2, from a Cramer-style coefficient box."""
    B = np.asarray(B, float)
    D = np.linalg.solve(B @ B.T, B)
    box = [int(np.floor(np.sqrt(r2) * np.linalg.norm(row) + 1e-9)) for row in D]
    out = []
    for d in itertools.product(*[range(-k, k + 1) for k in box]):
        d = np.array(d)
        if d.any():
            v = d @ B
            if v @ v <= r2 * (1 + 1e-9):
                out.append((d, float(v @ v)))
    return out


def brute_lambda1_sq(B):
    # box search in an LLL-reduced basis of the same lattice keeps the box small;
    # the basis change itself is checked to be unimodular
    res = lll_reduce(B)
    assert abs(int_det(res.unimodular)) == 1
    R = res.reduced.rows
    r2 = float(min(np.sum(R ** 2, axis=1)))
    return min(n2 for _, n2 in brute_vectors(R, r2))


def random_int_basis(g, n, lo=-20, hi=21):
    while True:
        B = g.integers(lo, hi, (n, n)).astype(float)
        if abs(np.linalg.det(B)) > 0.5:
            return B


int_bases = st.integers(0, 2**32 - 1).map(lambda s: random_int_basis(np.random.default_rng(s), 3))


class TestLatticeBasis:
    def test_rank_deficient_rejected(self):
        with pytest.raises(LatticeError, match="rank deficient"):
            LatticeBasis([[1, 2], [2, 4]])

    def test_too_many_vectors(self):
        with pytest.raises(LatticeError):
            LatticeBasis([[1], [2]])

    def test_gram(self):
        B = LatticeBasis([[1, 1], [0, 2]])
        np.testing.assert_array_equal(B.gram(), [[2, 2], [2, 4]])


class TestIntDet:
    @pytest.mark.parametrize("seed", range(20))
    def test_matches_float(self, seed):
        A = np.random.default_rng(seed).integers(-5, 6, (5, 5))
        assert int_det(A) == round(np.linalg.det(A))

    def test_zero_pivot_and_singular(self):
        assert int_det([[0, 1], [1, 0]]) == -1
        assert int_det([[1, 2], [2, 4]]) == 0
        with pytest.raises(ValueError):
            int_det([[1, 2, 3], [4, 5, 6]])


class TestLLL:
    def test_textbook_example(self):
        res = lll_reduce([[1, 1, 1], [-1, 0, 2], [3, 5, 6]])
        assert is_lll_reduced(res.reduced)
        assert abs(int_det(res.unimodular)) == 1
        assert sorted(np.sum(res.reduced.rows ** 2, axis=1)) == [1.0, 2.0, 5.0]

    @given(int_bases)
    @settings(max_examples=80, deadline=None)
    def test_properties(self, B):
        res = lll_reduce(B)
        U = res.unimodular
        assert U.dtype.kind == "i" and abs(int_det(U)) == 1
        np.testing.assert_allclose(res.reduced.rows, U @ B, atol=1e-9)
        assert is_lll_reduced(res.reduced, 0.99)
        # same lattice volume
        assert abs(np.linalg.det(res.reduced.rows)) == pytest.approx(abs(np.linalg.det(B)))

    def test_batch_inverse_exact(self, rng):
        bases = np.array([random_int_basis(rng, 4) for _ in range(30)])
        U, Uinv = lll_reduce_batch(bases)
        for u, ui in zip(U, Uinv):
            np.testing.assert_array_equal(u @ ui, np.eye(4, dtype=np.int64))

    def test_near_parallel_2d(self):
        for eps in (1e-2, 1e-4, 1e-6):
            B = np.array([[1.0, 0.0], [0.5 + eps, eps]])
            first = lll_reduce(B).reduced.rows[0]
            svp = svp_enumerate(B)
            assert first @ first == pytest.approx(svp.norm2, rel=1e-9)

    def test_first_vector_bound_4d(self):
        for seed in range(100):
            B = random_int_basis(np.random.default_rng(seed), 4)
            b1 = lll_reduce(B).reduced.rows[0]
            assert np.sqrt(b1 @ b1) <= 2 ** 1.5 * np.sqrt(brute_lambda1_sq(B)) + 1e-9

    def test_bad_delta(self):
        with pytest.raises(ValueError, match="delta"):
            lll_reduce(np.eye(2), delta=0.2)

    def test_is_lll_reduced_detects_failure(self):
        assert not is_lll_reduced([[1, 0], [5, 1]])
        assert not is_lll_reduced([[10, 0], [0, 1]])
        assert is_lll_reduced(np.eye(3))


class TestSVP:
    def test_Z2_tie_rule(self):
        r = svp_enumerate(np.eye(2))
        np.testing.assert_array_equal(r.coefficients, [1, 0])
        assert r.norm2 == 1.0

    def test_hexagonal(self):
        B = np.array([[1.0, 0.0], [0.5, np.sqrt(3) / 2]])
        r = svp_enumerate(B)
        assert r.norm2 == pytest.approx(1.0)
        # sign-normalized coefficients
        assert r.coefficients[np.flatnonzero(r.coefficients)[0]] > 0

    @pytest.mark.parametrize("seed", range(30))
    def test_matches_box_search(self, seed):
        g = np.random.default_rng(seed)
        B = g.standard_normal((4, 4))
        r = svp_enumerate(B)
        assert r.norm2 == pytest.approx(brute_lambda1_sq(B), rel=1e-9)
        np.testing.assert_allclose(r.vector, r.coefficients @ B)

    def test_small_radius_grows(self):
        r = svp_enumerate(np.diag([3.0, 4.0]), radius=0.1)
        assert r.norm2 == 9.0

    def test_dimension_guard(self):
        with pytest.raises(LatticeError, match="lll_reduce"):
            svp_enumerate(np.eye(13))

    def test_enumerate_ball_complete(self, rng):
        B = rng.standard_normal((3, 3))
        got = sorted(round(n2, 9) for _, n2 in enumerate_ball(B, 4.0))
        want = sorted(round(n2, 9) for _, n2 in brute_vectors(B, 4.0))
        assert got == want


class TestDual:
    def test_biorthogonal(self, rng):
        for _ in range(20):
            B = rng.standard_normal((4, 6))
            D = dual_basis(B).rows
            np.testing.assert_allclose(D @ B.T, np.eye(4), atol=1e-9)

    def test_near_singular_rejected(self):
        with pytest.raises(LatticeError, match="condition number"):
            dual_basis([[1.0, 0.0], [1.0, 1e-9]])


class TestSuccessiveMinima:
    @pytest.mark.parametrize("seed", range(15))
    def test_matches_brute_force(self, seed):
        B = np.random.default_rng(seed).standard_normal((3, 3))
        r2 = float(max(np.sum(B ** 2, axis=1)))
        pts = sorted(brute_vectors(B, r2), key=lambda p: p[1])
        chosen, minima = [], []
        for d, n2 in pts:
            if np.linalg.matrix_rank(np.array(chosen + [d], float)) > len(chosen):
                chosen.append(d)
                minima.append(n2)
        np.testing.assert_allclose(successive_minima(B), minima[:3], rtol=1e-9)

    def test_orthogonal(self):
        np.testing.assert_allclose(successive_minima(np.diag([3.0, 1.0, 2.0])), [1, 4, 9])

    def test_guard(self):
        with pytest.raises(LatticeError):
            successive_minima(np.eye(9))

    def test_bound_alamouti_lattices(self):
        d = make_design("alamouti")
        R = code_matrix(d)
        for seed in range(20):
            heff = effective_channel(sample_channel(2, 2, substream(seed)), R)
            rep = successive_minima_check(heff.matrix.T, d.K)
            assert rep.holds and rep.bound == 2 * 8 + 3 * 4
            assert rep.product == pytest.approx(rep.eps1_sq * rep.dual_eps_last_sq)

    def test_wrong_K(self):
        with pytest.raises(LatticeError, match="2K"):
            successive_minima_check(np.eye(4), 3)
