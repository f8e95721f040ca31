import hashlib
import itertools

import numpy as np
import pytest

from twmark.errors import ConfigurationError, SkipRoundError, ThresholdError
from twmark.field import FieldParams, FieldVector, FixedPointCodec
from twmark.sharing import (
    Commitment,
    ShamirConfig,
    commit,
    derive_embedding_share,
    lagrange_at_zero,
    open_check,
    shamir_reconstruct,
    shamir_share,
)


def _vec(vals, params):
    return FieldVector(np.array(vals, dtype=np.uint64), params)


class TestShamirConfig:
    def test_default_points(self, fM61):
        cfg = ShamirConfig(n_clients=5, threshold=3, params=fM61)
        assert cfg.points == (1, 2, 3, 4, 5)

    def test_threshold_bounds(self, fM61):
        with pytest.raises(ConfigurationError):
            ShamirConfig(n_clients=3, threshold=4, params=fM61)
        with pytest.raises(ConfigurationError):
            ShamirConfig(n_clients=3, threshold=0, params=fM61)

    def test_rejects_zero_or_duplicate_points(self, fM61):
        with pytest.raises(ConfigurationError):
            ShamirConfig(n_clients=2, threshold=2, params=fM61, points=(0, 1))
        with pytest.raises(ConfigurationError):
            ShamirConfig(n_clients=2, threshold=2, params=fM61, points=(1, 1))


class TestShamirShare:
    def test_worked_example_linear_polynomial(self):
        # P(x) = 5 + 3x over q = 31: P(1)=8, P(2)=11, P(3)=14
        params = FieldParams(31)
        cfg = ShamirConfig(n_clients=3, threshold=2, params=params)
        shares = shamir_share(_vec([5], params), cfg,
                              np.random.default_rng(0),
                              coeffs=np.array([[3]], dtype=np.uint64))
        assert [(s.point, int(s.values.values[0])) for s in shares] == [
            (1, 8), (2, 11), (3, 14)
        ]

    def test_roundtrip_all_tk_up_to_8(self, fM61, rng):
        secret = FieldVector(fM61.uniform(rng, 6), fM61)
        for K in range(1, 9):
            for t in range(1, K + 1):
                cfg = ShamirConfig(n_clients=K, threshold=t, params=fM61)
                shares = shamir_share(secret, cfg, rng)
                assert shamir_reconstruct(shares[:t], cfg) == secret
                assert shamir_reconstruct(shares, cfg) == secret

    def test_below_threshold_raises(self, fM61, rng):
        cfg = ShamirConfig(n_clients=5, threshold=3, params=fM61)
        shares = shamir_share(FieldVector(fM61.uniform(rng, 4), fM61), cfg, rng)
        with pytest.raises(ThresholdError):
            shamir_reconstruct(shares[:2], cfg)

    def test_empty_secret_rejected(self, fM61, rng):
        cfg = ShamirConfig(n_clients=3, threshold=2, params=fM61)
        with pytest.raises(ConfigurationError):
            shamir_share(FieldVector.zeros(0, fM61), cfg, rng)

    def test_coeffs_shape_validation(self, fM61, rng):
        cfg = ShamirConfig(n_clients=3, threshold=3, params=fM61)
        with pytest.raises(ConfigurationError):
            shamir_share(FieldVector.zeros(4, fM61), cfg, rng,
                         coeffs=np.zeros((1, 4), dtype=np.uint64))


class TestLagrange:
    def test_worked_examples(self, fM61):
        q = fM61.modulus
        assert lagrange_at_zero([1, 2], fM61) == {1: 2, 2: q - 1}
        assert lagrange_at_zero([1, 2, 3], fM61) == {1: 3, 2: q - 3, 3: 1}

    def test_interpolation_identity(self, fM61, rng):
        # sum_i lambda_i P(x_i) = P(0) for random cubics
        q = fM61.modulus
        for _ in range(20):
            coeffs = [int(v) for v in fM61.uniform(rng, 4)]
            pts = sorted(rng.choice(np.arange(1, 50), size=4, replace=False))
            lam = lagrange_at_zero([int(p) for p in pts], fM61)
            acc = 0
            for x in pts:
                px = sum(c * pow(int(x), i, q) for i, c in enumerate(coeffs)) % q
                acc = (acc + lam[int(x)] * px) % q
            assert acc == coeffs[0]

    def test_duplicate_points_rejected(self, fM61):
        with pytest.raises(ConfigurationError):
            lagrange_at_zero([1, 2, 1], fM61)


class TestEmbeddingShares:
    def test_congruence_over_random_subsets(self, fM61, rng):
        # sum over the participant set of lambda_k * s_k == encoded secret
        cfg = ShamirConfig(n_clients=10, threshold=4, params=fM61)
        secret = FieldVector(fM61.uniform(rng, 8), fM61)
        shares = {s.point: s for s in shamir_share(secret, cfg, rng)}
        for _ in range(50):
            size = int(rng.integers(4, 11))
            subset = tuple(sorted(
                int(p) + 1 for p in rng.choice(10, size, replace=False)
            ))
            acc = FieldVector.zeros(8, fM61)
            for k in subset:
                w = derive_embedding_share(shares[k], subset, cfg)
                acc = acc.add(w.values)
            assert acc == secret

    def test_below_threshold_skips(self, fM61, rng):
        cfg = ShamirConfig(n_clients=5, threshold=3, params=fM61)
        shares = shamir_share(FieldVector(fM61.uniform(rng, 2), fM61), cfg, rng)
        with pytest.raises(SkipRoundError):
            derive_embedding_share(shares[0], (1, 2), cfg)

    def test_point_must_participate(self, fM61, rng):
        cfg = ShamirConfig(n_clients=5, threshold=2, params=fM61)
        shares = shamir_share(FieldVector(fM61.uniform(rng, 2), fM61), cfg, rng)
        with pytest.raises(ConfigurationError):
            derive_embedding_share(shares[0], (2, 3, 4), cfg)


class TestCommitment:
    def _setup(self, fM61, rng):
        codec = FixedPointCodec(20, fM61)
        tau = rng.standard_normal(16)
        return codec.encode(tau), float(np.sqrt(16))

    def test_deterministic_given_nonce(self, fM61, rng):
        enc, norm = self._setup(fM61, rng)
        nonce = bytes(range(32))
        c1 = commit(enc, norm, 20, nonce=nonce)
        c2 = commit(enc, norm, 20, nonce=nonce)
        assert c1 == c2
        assert open_check(c1, enc, norm, 20)

    def test_fresh_nonces_hide(self, fM61, rng):
        enc, norm = self._setup(fM61, rng)
        assert commit(enc, norm, 20).digest != commit(enc, norm, 20).digest

    def test_binding_rejects_tampering(self, fM61, rng):
        enc, norm = self._setup(fM61, rng)
        c = commit(enc, norm, 20)
        other = enc.add(FieldVector(np.ones(16, dtype=np.uint64), fM61))
        assert not open_check(c, other, norm, 20)
        assert not open_check(c, enc, norm + 1.0, 20)
        assert not open_check(c, enc, norm, 21)

    def test_bad_lengths_rejected(self):
        with pytest.raises(ConfigurationError):
            Commitment(nonce=b"short", digest=b"\x00" * 32)
