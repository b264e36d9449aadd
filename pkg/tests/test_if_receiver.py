"""Integer-forcing equalizer selection, ring solving and decoding."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifstbc.channel import (Constellation, effective_channel, sample_channel, sample_channels,
                            substream, transmit)
from ifstbc.designs import code_matrix, make_design
from ifstbc.if_receiver import (IFEqualizer, RingError, decode, equalize_batch, layer_error_bound,
                                layer_noise, round_half_away, select_equalizer, solve_mod_ring)
from ifstbc.lattice import int_det


def _setup(name, n_r, M, seed):
    d = make_design(name)
    c = Constellation.create(M, d)
    H = sample_channel(n_r, d.n_t, substream(seed))
    heff = effective_channel(H, code_matrix(d))
    return d, c, H, heff


class TestRounding:
    def test_half_away(self):
        np.testing.assert_array_equal(round_half_away([0.5, -0.5, 1.5, -2.5, 0.49, -0.51]),
                                      [1, -1, 2, -3, 0, -1])


class TestSelection:
    def test_unimodular_1000_alamouti(self):
        d = make_design("alamouti")
        c = Constellation.create(4, d)
        from ifstbc.channel import effective_channels
        G = c.power_scale * effective_channels(sample_channels(1000, 2, 2, substream(5)), d)
        A, A_inv, B = equalize_batch(G, 100.0, c.energy, d.n_t)
        for a, ai in zip(A, A_inv):
            assert abs(int_det(a)) == 1
            np.testing.assert_array_equal(a @ ai, np.eye(4, dtype=np.int64))

    @pytest.mark.parametrize("seed", range(25))
    def test_mmse_filter_beats_zf(self, seed):
        d, c, _, heff = _setup("golden", 2, 4, seed)
        P = 10 ** 1.5
        eq = select_equalizer(heff, P, c.energy, power_scale=c.power_scale)
        G = c.power_scale * heff.matrix
        B_zf = eq.A @ np.linalg.pinv(G)
        g_zf = layer_noise(eq.A, B_zf, G, P, c.energy, d.n_t)
        assert np.all(eq.layer_noise <= g_zf * (1 + 1e-12))

    @pytest.mark.parametrize("seed", range(10))
    def test_filter_is_stationary_point(self, seed):
        d, c, _, heff = _setup("alamouti", 1, 4, seed)
        P = 50.0
        eq = select_equalizer(heff, P, c.energy, power_scale=c.power_scale)
        G = c.power_scale * heff.matrix
        g0 = layer_noise(eq.A, eq.B, G, P, c.energy, d.n_t)
        pert = np.random.default_rng(seed).standard_normal(eq.B.shape) * 1e-3
        assert np.all(layer_noise(eq.A, eq.B + pert, G, P, c.energy, d.n_t) >= g0)

    def test_layer_noise_closed_form(self):
        d, c, _, heff = _setup("golden", 2, 4, 3)
        P = 200.0
        eq = select_equalizer(heff, P, c.energy, power_scale=c.power_scale)
        G = c.power_scale * heff.matrix
        lam = d.n_t / (2 * P * c.energy)
        Winv = np.linalg.inv(G.T @ G + lam * np.eye(8))
        want = lam * c.energy * np.einsum("ij,jk,ik->i", eq.A, Winv, eq.A)
        np.testing.assert_allclose(eq.layer_noise, want, rtol=1e-9)

    def test_det_mod_ring(self):
        _, c, _, heff = _setup("alamouti", 2, 16, 0)
        eq = select_equalizer(heff, 10.0, c.energy, power_scale=c.power_scale, ring_size=4)
        assert eq.det_A_mod in (1, 3)

    def test_rank_deficient_rejected(self):
        d, c, _, heff = _setup("golden", 1, 4, 0)
        with pytest.raises(ValueError, match="n_r >= K/T"):
            select_equalizer(heff, 10.0, c.energy, power_scale=c.power_scale)

    def test_bare_matrix_needs_n_t(self):
        _, c, _, heff = _setup("alamouti", 1, 4, 0)
        with pytest.raises(ValueError, match="n_t"):
            select_equalizer(heff.matrix, 10.0, c.energy)
        assert select_equalizer(heff.matrix, 10.0, c.energy, n_t=2).A.shape == (4, 4)


class TestRingSolve:
    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=60, deadline=None)
    def test_roundtrip_mod_4(self, seed):
        g = np.random.default_rng(seed)
        # random unimodular matrix from elementary operations
        A = np.eye(4, dtype=np.int64)
        for _ in range(12):
            i, j = g.choice(4, 2, replace=False)
            A[i] += int(g.integers(-3, 4)) * A[j]
        for _ in range(5):
            r = g.integers(0, 4, 4)
            s = solve_mod_ring(A, r, 4)
            np.testing.assert_array_equal((A @ s) % 4, r)

    def test_even_determinant_rejected(self):
        with pytest.raises(RingError, match="not invertible"):
            solve_mod_ring([[2, 0], [0, 1]], [1, 1], 4)

    def test_odd_non_unit_determinant_ok(self):
        A = np.array([[3, 0], [0, 1]])
        s = solve_mod_ring(A, [1, 2], 4)
        np.testing.assert_array_equal((A @ s) % 4, [1, 2])

    def test_user_equalizer_without_inverse(self):
        d, c, H, heff = _setup("alamouti", 2, 4, 9)
        eq = select_equalizer(heff, 1e6, c.energy, power_scale=c.power_scale)
        user = IFEqualizer(A=eq.A, B=eq.B, layer_noise=eq.layer_noise)
        s = np.array([1, 0, 1, 1])
        y = transmit(d, c, s, H, 1e6, noiseless=True)
        np.testing.assert_array_equal(decode(y, user, c), s)

    def test_user_equalizer_even_det(self):
        c = Constellation.create(4)
        eq = IFEqualizer(A=2 * np.eye(2, dtype=np.int64), B=np.eye(2), layer_noise=np.zeros(2))
        with pytest.raises(RingError):
            decode(np.zeros(2), eq, c)


class TestDecode:
    def test_all_256_alamouti_16_identity(self):
        d = make_design("alamouti")
        c = Constellation.create(16, d)
        from ifstbc.channel import ChannelRealization
        H = ChannelRealization(np.eye(2, dtype=complex))
        heff = effective_channel(H, code_matrix(d))
        eq = select_equalizer(heff, 100.0, c.energy, power_scale=c.power_scale)
        grid = np.array(np.meshgrid(*[range(4)] * 4, indexing="ij")).reshape(4, -1).T
        for s in grid:
            y = transmit(d, c, s, H, 100.0, noiseless=True)
            np.testing.assert_array_equal(decode(y, eq, c), s)

    def test_golden_noiseless_1000(self):
        d = make_design("golden")
        c = Constellation.create(4, d)
        R = code_matrix(d)
        g = substream(77)
        for _ in range(1000):
            H = sample_channel(2, 2, g)
            s = g.integers(0, 2, 8)
            eq = select_equalizer(effective_channel(H, R), 100.0, c.energy,
                                  power_scale=c.power_scale)
            y = transmit(d, c, s, H, 100.0, noiseless=True)
            np.testing.assert_array_equal(decode(y, eq, c), s)

    def test_shape_checked(self):
        _, c, _, heff = _setup("alamouti", 1, 4, 0)
        eq = select_equalizer(heff, 10.0, c.energy, power_scale=c.power_scale)
        with pytest.raises(ValueError, match="shape"):
            decode(np.zeros(3), eq, c)


class TestErrorBound:
    def test_chernoff_bound_holds_at_fixed_channel(self):
        d, c, H, heff = _setup("alamouti", 2, 4, 12)
        P = 100.0
        eq = select_equalizer(heff, P, c.energy, power_scale=c.power_scale)
        bound = layer_error_bound(eq, P, d.n_t)
        G = c.power_scale * heff.matrix
        g = substream(13)
        n = 100_000
        s = g.integers(0, 2, (n, 4))
        Y = (s - c.offset) @ G.T + np.sqrt(d.n_t / P) * g.standard_normal((n, 8)) * np.sqrt(0.5)
        ytil = Y @ eq.B.T + c.offset * eq.A.sum(axis=1)
        wrong = round_half_away(ytil) != s @ eq.A.T
        rate = wrong.mean(axis=0)
        assert np.all(rate <= bound)
        # union of layers: block error rate <= sum of layer rates (+ 3 sigma)
        block = wrong.any(axis=1).mean()
        assert block <= rate.sum() + 3 * np.sqrt(rate.sum() / n)

    def test_zero_filter_row(self):
        eq = IFEqualizer(A=np.eye(2, dtype=np.int64), B=np.array([[0.0, 0.0], [1.0, 0.0]]),
                         layer_noise=np.zeros(2))
        b = layer_error_bound(eq, 10.0, 2)
        assert b[0] == 0.0 and b[1] == pytest.approx(np.exp(-10 / 8))
        with pytest.raises(ValueError):
            layer_error_bound(eq, 0.0, 2)
