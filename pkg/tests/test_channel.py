"""Channel sampling, constellation scaling, real embedding and transmission."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ifstbc.channel import (ChannelRealization, Constellation, effective_channel,
                            effective_channels, embed_real, sample_channel, sample_channels,
                            substream, transmit)
from ifstbc.designs import DesignError, assemble, code_matrix, make_design, vectorize


class TestSubstream:
    def test_reproducible(self):
        a = substream(7, 1, 2).standard_normal(5)
        b = substream(7, 1, 2).standard_normal(5)
        np.testing.assert_array_equal(a, b)

    def test_keys_separate_streams(self):
        a = substream(7, 1, 2).standard_normal(5)
        assert not np.allclose(a, substream(7, 2, 1).standard_normal(5))
        assert not np.allclose(a, substream(8, 1, 2).standard_normal(5))


class TestSampling:
    def test_shape_and_tag(self):
        H = sample_channel(3, 2, substream(0), seed_tag=11)
        assert H.H.shape == (3, 2) and (H.n_r, H.n_t) == (3, 2) and H.seed_tag == 11

    def test_unit_variance(self):
        H = sample_channels(100_000, 2, 2, substream(1))
        var = np.mean(np.abs(H) ** 2, axis=0)
        assert np.all(np.abs(var - 1) < 0.01)
        assert np.all(np.abs(H.mean(axis=0)) < 0.01)
        # real and imaginary parts each carry half the power
        np.testing.assert_allclose(np.mean(H.real ** 2, axis=0), 0.5, atol=0.01)

    def test_bad_dims(self):
        with pytest.raises(ValueError):
            sample_channel(0, 2, substream(0))


class TestEmbedding:
    def test_block_form(self):
        H = np.array([[1 + 2j, 3 - 1j]])
        np.testing.assert_array_equal(embed_real(H), [[1, 3, -2, 1], [2, -1, 1, 3]])

    def test_singular_values_doubled(self, rng):
        H = rng.standard_normal((3, 2)) + 1j * rng.standard_normal((3, 2))
        sv = np.linalg.svd(H, compute_uv=False)
        sv_real = np.linalg.svd(embed_real(H), compute_uv=False)
        np.testing.assert_allclose(sv_real, np.repeat(sv, 2), rtol=1e-12)

    @given(st.integers(1, 3), st.integers(1, 3), st.integers(0, 10_000))
    @settings(max_examples=40, deadline=None)
    def test_multiplication_homomorphism(self, n, m, seed):
        g = np.random.default_rng(seed)
        H = g.standard_normal((n, m)) + 1j * g.standard_normal((n, m))
        x = g.standard_normal(m) + 1j * g.standard_normal(m)
        y = embed_real(H) @ np.concatenate([x.real, x.imag])
        np.testing.assert_allclose(y, np.concatenate([(H @ x).real, (H @ x).imag]), atol=1e-12)


class TestEffectiveChannel:
    def test_vec_consistency(self, design, rng):
        R = code_matrix(design)
        for n_r in (1, 2):
            for _ in range(50):
                Hc = rng.standard_normal((n_r, design.n_t)) + 1j * rng.standard_normal((n_r, design.n_t))
                s = rng.standard_normal(design.n_real)
                heff = effective_channel(ChannelRealization(Hc), R)
                np.testing.assert_allclose(heff.matrix @ s, vectorize(Hc @ assemble(design, s)),
                                           atol=1e-12)

    def test_batched_matches_kron(self, design, rng):
        H = sample_channels(5, 2, design.n_t, rng)
        batch = effective_channels(H, design)
        R = code_matrix(design)
        for h, m in zip(H, batch):
            np.testing.assert_allclose(m, effective_channel(ChannelRealization(h), R).matrix,
                                       atol=1e-12)

    def test_rank_flagged_not_rejected(self, rng):
        d = make_design("golden")
        H = sample_channel(1, 2, rng)
        heff = effective_channel(H, code_matrix(d))
        assert heff.matrix.shape == (4, 8) and not heff.full_rank
        assert effective_channel(sample_channel(2, 2, rng), code_matrix(d)).full_rank

    def test_incompatible_shapes(self, rng):
        with pytest.raises(DesignError):
            effective_channel(sample_channel(2, 3, rng), code_matrix(make_design("alamouti")))


class TestConstellation:
    @pytest.mark.parametrize("M, q, Ebar", [(4, 2, 0.25), (16, 4, 1.25), (64, 8, 5.25)])
    def test_ring(self, M, q, Ebar):
        c = Constellation.create(M)
        assert c.ring_size == q and c.offset == (q - 1) / 2
        assert c.energy == Ebar == (q * q - 1) / 12
        assert c.bits_per_symbol == int(np.log2(q))

    @pytest.mark.parametrize("M", [2, 8, 9, 36, 0])
    def test_bad_M(self, M):
        with pytest.raises(ValueError, match="even power of 2"):
            Constellation.create(M)

    def test_contains(self):
        c = Constellation.create(16)
        assert c.contains([0, 3, 2]) and not c.contains([4]) and not c.contains([-1])
        assert not c.contains([0.5])

    def test_unit_entry_energy_alamouti_16(self, rng):
        d = make_design("alamouti")
        c = Constellation.create(16, d)
        s = rng.integers(0, 4, (200_000, 4))
        X = np.einsum("nk,kij->nij", c.center(s), d.weights)
        assert abs(np.mean(np.abs(X) ** 2) - 1) < 0.01

    def test_unit_entry_energy_exact(self, design):
        # average over every ring vector of the centered constellation, M = 4
        c = Constellation.create(4, design)
        grid = np.array(np.meshgrid(*[[0, 1]] * design.n_real, indexing="ij")).reshape(design.n_real, -1).T
        X = np.einsum("nk,kij->nij", c.center(grid), design.weights)
        assert np.mean(np.abs(X) ** 2) == pytest.approx(1.0, rel=1e-12)


class TestTransmit:
    def test_noiseless_is_linear_map(self, rng):
        d = make_design("golden")
        c = Constellation.create(4, d)
        H = sample_channel(2, 2, rng)
        s = rng.integers(0, 2, d.n_real)
        y = transmit(d, c, s, H, P=10.0, noiseless=True)
        np.testing.assert_allclose(y, vectorize(H.H @ assemble(d, c.center(s))), atol=1e-12)

    def test_noise_variance(self):
        d = make_design("alamouti")
        c = Constellation.create(4, d)
        H = np.eye(2, dtype=complex)
        s = np.zeros(4, dtype=int)
        base = transmit(d, c, s, H, 4.0, noiseless=True)
        stream = substream(3)
        ys = np.array([transmit(d, c, s, H, 4.0, stream) for _ in range(20_000)])
        # per real component: (n_t / P) / 2 = 0.25
        assert abs(np.var(ys - base) - 0.25) < 0.01

    def test_rejects_outside_ring(self):
        d = make_design("alamouti")
        c = Constellation.create(4, d)
        with pytest.raises(ValueError, match="ring"):
            transmit(d, c, [0, 1, 2, 0], np.eye(2), 1.0, noiseless=True)

    def test_needs_stream_or_noiseless(self):
        d = make_design("alamouti")
        c = Constellation.create(4, d)
        with pytest.raises(ValueError, match="substream"):
            transmit(d, c, [0, 1, 1, 0], np.eye(2), 1.0)
        with pytest.raises(ValueError, match="positive"):
            transmit(d, c, [0, 1, 1, 0], np.eye(2), 0.0, noiseless=True)
