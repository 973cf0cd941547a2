import json

import numpy as np
import pytest
from hypothesis import given, strategies as st

from fdbbd.keygen import (DegenerateSecret, ProtocolConfig, compute_secret, derive_key, hash_key,
                          normalize_secret, normalize_unit_interval, quantize, rmse, run_protocol,
                          support_entropy_bits, transcript_json, true_secret, upsample_beta,
                          upsample_h)
from fdbbd.lifting import lift
from fdbbd.signals import ParameterError, complex_normal


def test_upsampling_layout():
    np.testing.assert_array_equal(upsample_h([1, 2], 3), [1, 2, 0, 0, 0, 0])
    np.testing.assert_array_equal(upsample_beta([1, 2, 3], 2), [1, 0, 2, 0, 3, 0])


@given(st.integers(1, 10), st.integers(1, 10), st.integers(0, 2**32 - 1))
def test_two_party_secrets_coincide(mu, n, seed):
    r = np.random.default_rng(seed)
    h, a, b = complex_normal(r, mu), complex_normal(r, n), complex_normal(r, n)
    c_alice = compute_secret(lift(h, b), a).c
    c_bob = compute_secret(lift(h, a), b).c
    c3 = true_secret(h, a, b)
    scale = np.linalg.norm(c3)
    assert np.linalg.norm(c_alice - c_bob) <= 1e-10 * scale
    assert np.linalg.norm(c_alice - c3) <= 1e-10 * scale


def test_secret_length_mismatch(rng):
    with pytest.raises(ParameterError):
        compute_secret(np.ones((3, 4)), np.ones(5))


def test_normalizations():
    c = np.array([3, 4j])
    np.testing.assert_allclose(normalize_secret(c), [0.6, 0.8j])
    np.testing.assert_allclose(normalize_unit_interval([1, 3, 2]), [0, 1, 0.5])
    with pytest.raises(DegenerateSecret):
        normalize_secret(np.zeros(3))
    with pytest.raises(DegenerateSecret):
        normalize_unit_interval(np.ones(3))


def test_rmse():
    assert rmse([0, 0], [3, 4]) == pytest.approx(np.sqrt(12.5))
    with pytest.raises(ParameterError):
        rmse([1], [1, 2])


class TestQuantize:
    def test_zero_maps_to_midpoint(self):
        bits, clip = quantize(np.array([0j]), 2)
        assert clip == 1.0
        np.testing.assert_array_equal(bits, [1, 1])

    def test_extremes(self):
        bits, _ = quantize(np.array([-5 + 5j]), 4, clip=1.0)
        np.testing.assert_array_equal(bits, [0, 0, 1, 1])

    def test_bad_theta(self):
        with pytest.raises(ParameterError):
            quantize(np.ones(2), 3)
        with pytest.raises(ParameterError):
            quantize(np.array([np.nan]), 2)

    @given(st.integers(0, 2**32 - 1), st.sampled_from([2, 4, 8]))
    def test_length_and_determinism(self, seed, theta):
        c = complex_normal(np.random.default_rng(seed), 20)
        b1, k1 = quantize(c, theta)
        b2, k2 = quantize(c.copy(), theta)
        assert b1.size == 20 * theta and set(np.unique(b1)) <= {0, 1}
        np.testing.assert_array_equal(b1, b2)
        assert k1 == k2


class TestHash:
    @pytest.mark.parametrize("family", ["toeplitz", "multiply_shift", "shake256"])
    def test_deterministic_and_sized(self, rng, family):
        bits = rng.integers(0, 2, 512).astype(np.uint8)
        k1 = hash_key(bits, 128, family, seed=3)
        assert k1.size == 128
        np.testing.assert_array_equal(k1, hash_key(bits, 128, family, seed=3))
        assert not np.array_equal(k1, hash_key(bits, 128, family, seed=4))

    def test_toeplitz_matches_dense_matrix(self, rng):
        from scipy.linalg import toeplitz
        bits = rng.integers(0, 2, 64).astype(np.uint8)
        seed_rng = np.random.default_rng(9)
        col = seed_rng.integers(0, 2, 16)
        row = seed_rng.integers(0, 2, 64)
        row[0] = col[0]
        expected = (toeplitz(col, row) @ bits) % 2
        np.testing.assert_array_equal(hash_key(bits, 16, "toeplitz", seed=9), expected)

    @pytest.mark.parametrize("family", ["toeplitz", "multiply_shift", "shake256"])
    def test_single_bit_flip_changes_about_half(self, family):
        rng = np.random.default_rng(1)
        flips = []
        for _ in range(40):
            bits = rng.integers(0, 2, 256).astype(np.uint8)
            other = bits.copy()
            other[rng.integers(256)] ^= 1
            flips.append(np.mean(hash_key(bits, 128, family) != hash_key(other, 128, family)))
        assert 0.35 < np.mean(flips) < 0.65

    def test_errors(self):
        with pytest.raises(ParameterError):
            hash_key(np.ones(8, np.uint8), 9)
        with pytest.raises(ParameterError):
            hash_key(np.ones(8, np.uint8), 4, "md5")
        assert hash_key(np.ones(8, np.uint8), 0).size == 0


def test_derive_key_equal_inputs_agree(rng):
    c = complex_normal(rng, 400)
    k1 = derive_key([c], 8, 128)
    k2 = derive_key([c * 7.0], 8, 128)  # scale is normalised away
    np.testing.assert_array_equal(k1.key, k2.key)
    assert k1.bits.size == 400 * 8 and k1.m == 1


def test_config_validation():
    with pytest.raises(ParameterError):
        ProtocolConfig(n=10, mu=11)
    with pytest.raises(ParameterError):
        ProtocolConfig(theta=3)
    with pytest.raises(ParameterError):
        ProtocolConfig(m=0)


def test_noiseless_protocol_agrees():
    out = run_protocol(ProtocolConfig(n=64, mu=50, k=2, s=2, m=3), 4)
    assert out["key_agreement"]
    assert max(out["per_round_rmse_l2"]) < 1e-9
    assert len(out["transcripts"]) == 3
    np.testing.assert_array_equal(out["alice_key"].bits, out["bob_key"].bits)


def test_protocol_deterministic():
    cfg = ProtocolConfig(n=64, mu=40, k=2, s=2, snr_db=30)
    a, b = run_protocol(cfg, 11), run_protocol(cfg, 11)
    np.testing.assert_array_equal(a["alice_secrets"][0].c, b["alice_secrets"][0].c)
    assert a["per_round_rmse"] == b["per_round_rmse"]


def test_static_channel_flag():
    cfg = ProtocolConfig(n=64, mu=50, k=2, s=2, m=3, static_channel=True)
    assert run_protocol(cfg, 0)["key_agreement"]


def test_transcript_json_roundtrip():
    cfg = ProtocolConfig(n=32, mu=16, k=2, s=2)
    rows = json.loads(transcript_json(run_protocol(cfg, 1), 1, cfg))
    assert rows[0]["seed"] == 1 and rows[0]["params"]["snr_db"] is None


def test_support_entropy_bits():
    info = support_entropy_bits(128, 4)
    assert info["partition_bits"] == pytest.approx(np.log2(70))
    assert info["support_bits"] == pytest.approx(np.log2(10668000))
