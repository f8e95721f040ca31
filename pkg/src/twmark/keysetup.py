"""One-time key establishment: trusted dealer and dealer-free DKG.

Dealer path: sample the key tau ~ N(0, I_d), publish a commitment,
Shamir-share the fixed-point encoding, then discard tau (tests may keep
it behind keep_key for oracle checks).

DKG path: each client samples an additive contribution w_k ~ N(0, I_d/K),
shares its encoding through its own degree-(t-1) polynomials and sends
evaluations to every other client; client i's share is the componentwise
field sum of what it received. The implicit key tau = sum_k w_k is never
materialized at any single party.

Overhead accounting for the DKG follows the closed forms: K(K-1)
point-to-point messages (self-delivery is local), each carrying d
8-byte words, with per-client compute modeled as K*t*d field
multiplications.
"""

import struct
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .field import FieldVector, ProtocolCodecs
from .sharing import Commitment, ShamirConfig, ShamirShare, commit, shamir_share


@dataclass(frozen=True)
class OverheadRecord:
    """Network and compute accounting for a (simulated) DKG run."""

    n_clients: int
    threshold: int
    d: int
    messages: int             # point-to-point sends, self-delivery excluded
    payload_bytes: int        # messages * d * 8
    per_client_mults: int     # field multiplications per client
    compute_ns: float         # per-client compute time under field_mul_ns
    comm_ns: float            # per-client communication time under bandwidth

    def csv_row(self) -> str:
        return (
            f"{self.n_clients},{self.threshold},{self.d},{self.messages},"
            f"{self.payload_bytes},{self.compute_ns:.6g},{self.comm_ns:.6g}"
        )

    CSV_HEADER = "K,t,d,messages,bytes,compute_ns,comm_ns"


@dataclass
class SetupResult:
    """Key material produced by either setup path."""

    cfg: ShamirConfig
    codecs: ProtocolCodecs
    shares: list                    # one ShamirShare per client
    public_norm: float              # published ||tau||_2 surrogate: sqrt(d)
    commitment: Commitment = None   # dealer path only
    overhead: OverheadRecord = None  # DKG path only
    debug_key: np.ndarray = None            # real tau, debug builds only
    debug_contributions: list = None        # DKG per-client w_k, debug only

    @property
    def d(self) -> int:
        return len(self.shares[0])


def setup_trusted_dealer(cfg: ShamirConfig, d: int, rng: np.random.Generator,
                         codecs: ProtocolCodecs = None,
                         keep_key: bool = False) -> SetupResult:
    """Alg.-style dealer setup: sample, commit, share, delete."""
    if d < 1:
        raise ConfigurationError("d must be >= 1")
    if codecs is None:
        codecs = ProtocolCodecs(params=cfg.params)
    tau = rng.standard_normal(d)
    enc = codecs.share.encode(tau)
    public_norm = float(np.sqrt(d))  # expected norm under N(0, I_d)
    c = commit(enc, public_norm, codecs.f_share,
               nonce=rng.bytes(32))
    shares = shamir_share(enc, cfg, rng)
    return SetupResult(
        cfg=cfg,
        codecs=codecs,
        shares=shares,
        public_norm=public_norm,
        commitment=c,
        debug_key=tau if keep_key else None,
    )


def dkg_exchange(contributions_enc: list, cfg: ShamirConfig,
                 rngs: list, coeffs_per_client: list = None):
    """Core DKG exchange over already-encoded contributions.

    Each client k Shamir-shares contributions_enc[k] with its own random
    polynomials; client i sums the evaluations addressed to it. Returns
    (shares, per_client_evaluations) where per_client_evaluations[k] is
    the list of ShamirShare rows client k produced (its outgoing traffic),
    used by secrecy tests to reconstruct a coalition's full view.
    """
    K = cfg.n_clients
    if len(contributions_enc) != K:
        raise ConfigurationError("need one contribution per client")
    outgoing = []
    for k in range(K):
        coeffs = None if coeffs_per_client is None else coeffs_per_client[k]
        outgoing.append(
            shamir_share(contributions_enc[k], cfg, rngs[k], coeffs=coeffs)
        )
    d = len(contributions_enc[0])
    shares = []
    for i, x in enumerate(cfg.points):
        acc = FieldVector.zeros(d, cfg.params)
        for k in range(K):
            acc = acc.add(outgoing[k][i].values)
        shares.append(ShamirShare(point=x, values=acc))
    return shares, outgoing


def setup_dkg(cfg: ShamirConfig, d: int, master_rng: np.random.Generator = None,
              rngs: list = None, codecs: ProtocolCodecs = None,
              keep_contributions: bool = False) -> SetupResult:
    """Dealer-free setup; the key is implicitly sum_k w_k, w_k ~ N(0, I_d/K).

    Per-client RNG streams may be passed explicitly; otherwise they are
    spawned deterministically from master_rng.
    """
    if d < 1:
        raise ConfigurationError("d must be >= 1")
    if codecs is None:
        codecs = ProtocolCodecs(params=cfg.params)
    K = cfg.n_clients
    if rngs is None:
        if master_rng is None:
            raise ConfigurationError("pass master_rng or per-client rngs")
        seeds = master_rng.integers(0, 2**63, size=K)
        rngs = [np.random.Generator(np.random.PCG64(int(s))) for s in seeds]
    if len(rngs) != K:
        raise ConfigurationError("need one rng per client")
    contributions = [rngs[k].standard_normal(d) / np.sqrt(K) for k in range(K)]
    enc = [codecs.share.encode(w) for w in contributions]
    shares, _ = dkg_exchange(enc, cfg, rngs)
    messages = K * (K - 1)
    overhead = OverheadRecord(
        n_clients=K,
        threshold=cfg.threshold,
        d=d,
        messages=messages,
        payload_bytes=messages * d * 8,
        per_client_mults=K * cfg.threshold * d,
        compute_ns=0.0,
        comm_ns=0.0,
    )
    return SetupResult(
        cfg=cfg,
        codecs=codecs,
        shares=shares,
        public_norm=float(np.sqrt(d)),
        overhead=overhead,
        debug_contributions=contributions if keep_contributions else None,
        debug_key=sum(contributions) if keep_contributions else None,
    )


def dkg_cost_model(K: int, t: int, d: int, bandwidth_bps: float = 1e9,
                   field_mul_ns: float = 10.0) -> OverheadRecord:
    """Closed-form DKG cost: per-client O(Kd) communication, O(Ktd) compute.

    Communication time charges (K-1) outgoing vector shares of d 8-byte
    words each against the bandwidth; compute charges K*t*d Horner
    multiplications at field_mul_ns each.
    """
    if K < 1 or t < 1 or d < 1 or bandwidth_bps <= 0 or field_mul_ns <= 0:
        raise ConfigurationError("all cost-model arguments must be positive")
    messages = K * (K - 1)
    per_client_bits = (K - 1) * d * 8 * 8
    per_client_mults = K * t * d
    return OverheadRecord(
        n_clients=K,
        threshold=t,
        d=d,
        messages=messages,
        payload_bytes=messages * d * 8,
        per_client_mults=per_client_mults,
        compute_ns=per_client_mults * field_mul_ns,
        comm_ns=per_client_bits / bandwidth_bps * 1e9,
    )


# -- key-material files: header + share, binary --

_SHARE_MAGIC = b"TWSHARE1"
_SHARE_HDR = "<QHIIQd"  # q, f_share, K, t, point, public_norm


def save_share(share: ShamirShare, setup: SetupResult, path):
    """Per-client key-material file; self-contained for verification."""
    with open(path, "wb") as fh:
        fh.write(_SHARE_MAGIC)
        fh.write(struct.pack(
            _SHARE_HDR,
            setup.codecs.params.modulus, setup.codecs.f_share,
            setup.cfg.n_clients, setup.cfg.threshold,
            share.point, setup.public_norm,
        ))
        fh.write(share.values.to_bytes())


def load_share(path):
    """Returns (ShamirShare, header dict with q/f_share/K/t/public_norm)."""
    with open(path, "rb") as fh:
        data = fh.read()
    if data[:8] != _SHARE_MAGIC:
        raise ConfigurationError(f"{path}: not a share file")
    hdr_size = struct.calcsize(_SHARE_HDR)
    q, f_share, K, t, point, public_norm = struct.unpack(
        _SHARE_HDR, data[8:8 + hdr_size]
    )
    from .field import FieldParams

    vec = FieldVector.from_bytes(data[8 + hdr_size:], FieldParams(q))
    header = {
        "modulus": int(q), "f_share": int(f_share), "n_clients": int(K),
        "threshold": int(t), "public_norm": float(public_norm),
    }
    return ShamirShare(point=int(point), values=vec), header
