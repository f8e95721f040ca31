"""Vector Shamir secret sharing, Lagrange recombination and commitments.

A length-d secret is shared coordinate-by-coordinate: d independent
uniform degree-(t-1) polynomials with common public evaluation points
(default x_k = k). Any t shares reconstruct the secret exactly; fewer
reveal nothing. Embedding shares w_k = lambda_k * s_k sum to the secret
over any participant set of size >= t.

The commitment is SHA-256 over a fixed byte layout:
rho (32) || d (8 LE) || q (8 LE) || f_share (2 LE) || secret words || norm double.
"""

import hashlib
import secrets
from dataclasses import dataclass
import struct

import numpy as np

from .errors import ConfigurationError, SkipRoundError, ThresholdError
from .field import FieldParams, FieldVector


@dataclass(frozen=True)
class ShamirConfig:
    """(t, K) threshold configuration with public evaluation points."""

    n_clients: int
    threshold: int
    params: FieldParams
    points: tuple = None

    def __post_init__(self):
        if self.points is None:
            object.__setattr__(
                self, "points", tuple(range(1, self.n_clients + 1))
            )
        if not (1 <= self.threshold <= self.n_clients):
            raise ConfigurationError(
                f"need 1 <= t <= K, got t={self.threshold}, K={self.n_clients}"
            )
        if len(self.points) != self.n_clients:
            raise ConfigurationError("need one evaluation point per client")
        pts = [p % self.params.modulus for p in self.points]
        if 0 in pts or len(set(pts)) != len(pts):
            raise ConfigurationError("evaluation points must be distinct and nonzero")


@dataclass(frozen=True)
class ShamirShare:
    """One client's share: evaluation point and per-coordinate values."""

    point: int
    values: FieldVector

    def __len__(self):
        return len(self.values)


@dataclass(frozen=True)
class EmbeddingShare:
    """w_k = lambda_k * s_k for a specific participant set."""

    point: int
    values: FieldVector
    lagrange: int
    participants: tuple


def shamir_share(secret: FieldVector, cfg: ShamirConfig, rng: np.random.Generator,
                 coeffs=None) -> list:
    """Share a field vector; returns K shares.

    coeffs optionally forces the t-1 higher polynomial coefficients as an
    array of shape (t-1, d) for deterministic tests; by default they are
    uniform in F_q.
    """
    cfg.params._check(secret.params)
    d = len(secret)
    if d == 0:
        raise ConfigurationError("secret must be non-empty")
    t = cfg.threshold
    if coeffs is None:
        coeffs = cfg.params.uniform(rng, (t - 1, d))
    else:
        coeffs = np.asarray(coeffs, dtype=np.uint64)
        if coeffs.shape != (t - 1, d):
            raise ConfigurationError(f"coeffs must have shape {(t - 1, d)}")
    shares = []
    for x in cfg.points:
        # Horner over the coefficient rows: P(x) = secret + a1*x + ... + a_{t-1}*x^{t-1}
        acc = FieldVector.zeros(d, cfg.params)
        for m in range(t - 2, -1, -1):
            acc = acc.add(FieldVector(coeffs[m], cfg.params))
            acc = acc.scalar_mul(x)
        acc = acc.add(secret)
        shares.append(ShamirShare(point=x, values=acc))
    return shares


def lagrange_at_zero(points, params: FieldParams) -> dict:
    """Lagrange coefficients at 0: lambda_i = prod_{j != i} (0-x_j)/(x_i-x_j).

    For any polynomial P of degree < |points| through the shares,
    sum_i lambda_i P(x_i) = P(0).
    """
    pts = list(points)
    if len(set(p % params.modulus for p in pts)) != len(pts):
        raise ConfigurationError("duplicate evaluation points")
    q = params.modulus
    lam = {}
    for xi in pts:
        num, den = 1, 1
        for xj in pts:
            if xj == xi:
                continue
            num = num * (-xj) % q
            den = den * (xi - xj) % q
        lam[xi] = num * params.inv(den) % q
    return lam


def shamir_reconstruct(shares, cfg: ShamirConfig) -> FieldVector:
    """Recover the secret from >= t shares, exactly."""
    shares = list(shares)
    if len(shares) < cfg.threshold:
        raise ThresholdError(
            f"{len(shares)} shares given, threshold is {cfg.threshold}"
        )
    pts = [s.point for s in shares]
    lam = lagrange_at_zero(pts, cfg.params)
    acc = FieldVector.zeros(len(shares[0]), cfg.params)
    for s in shares:
        acc = acc.add(s.values.scalar_mul(lam[s.point]))
    return acc


def derive_embedding_share(share: ShamirShare, participants, cfg: ShamirConfig) -> EmbeddingShare:
    """w_k for the given participant set; the w_k over the set sum to the secret.

    Raises SkipRoundError when the participant set is below threshold,
    matching the protocol's skip-the-round behavior.
    """
    participants = tuple(sorted(participants))
    if len(participants) < cfg.threshold:
        raise SkipRoundError(
            f"participant set of size {len(participants)} is below t={cfg.threshold}"
        )
    if share.point not in participants:
        raise ConfigurationError(f"share point {share.point} not in participant set")
    lam = lagrange_at_zero(participants, cfg.params)[share.point]
    return EmbeddingShare(
        point=share.point,
        values=share.values.scalar_mul(lam),
        lagrange=lam,
        participants=participants,
    )


@dataclass(frozen=True)
class Commitment:
    """Hiding, binding digest of the encoded key and its public norm."""

    nonce: bytes  # 32 bytes, uniform
    digest: bytes  # SHA-256

    def __post_init__(self):
        if len(self.nonce) != 32 or len(self.digest) != 32:
            raise ConfigurationError("nonce and digest must be 32 bytes")


def _commitment_payload(nonce: bytes, secret_enc: FieldVector, public_norm: float,
                        f_share: int) -> bytes:
    return (
        nonce
        + len(secret_enc).to_bytes(8, "little")
        + secret_enc.params.modulus.to_bytes(8, "little")
        + f_share.to_bytes(2, "little")
        + secret_enc.words()
        + struct.pack("<d", public_norm)
    )


def commit(secret_enc: FieldVector, public_norm: float, f_share: int,
           nonce: bytes = None) -> Commitment:
    """Commit to the encoded key; a fresh 32-byte nonce provides hiding."""
    if nonce is None:
        nonce = secrets.token_bytes(32)
    payload = _commitment_payload(nonce, secret_enc, public_norm, f_share)
    return Commitment(nonce=nonce, digest=hashlib.sha256(payload).digest())


def open_check(c: Commitment, secret_enc: FieldVector, public_norm: float,
               f_share: int) -> bool:
    """True iff the recomputed digest matches; mismatch is not an error."""
    payload = _commitment_payload(c.nonce, secret_enc, public_norm, f_share)
    return hashlib.sha256(payload).digest() == c.digest
