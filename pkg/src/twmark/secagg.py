"""Simulated secure aggregation via pairwise additive masking.

The server-side view is modeled explicitly: a session records only the
masked client submissions and the final sum. For every unordered pair
(i, j) with i < j a mask vector is expanded deterministically from a
per-pair seed; client i adds it and client j subtracts it, so masks
cancel and the sum of masked submissions equals the field sum of the
raw inputs, bit-exactly.

The participant set is frozen before submissions; dropout recovery is
deliberately not modeled.
"""

import hashlib
import json
from dataclasses import dataclass, field as dc_field

import numpy as np

from .errors import ConfigurationError, ProtocolAbortError
from .field import FieldParams, FieldVector


@dataclass
class SecAggSession:
    """One aggregation round: fixed participants, logged observations."""

    round_id: int
    participants: tuple
    d: int
    params: FieldParams
    session_seed: int
    observations: list = dc_field(default_factory=list)  # (client, masked uint64 array)
    output: FieldVector = None

    def __post_init__(self):
        self.participants = tuple(sorted(self.participants))
        if len(set(self.participants)) != len(self.participants):
            raise ConfigurationError("duplicate participants")

    def pair_mask(self, i: int, j: int) -> FieldVector:
        """Deterministic mask for the unordered pair (i, j), i < j."""
        if i >= j:
            raise ConfigurationError("pair masks are keyed by i < j")
        seq = np.random.SeedSequence((self.session_seed, self.round_id, i, j))
        rng = np.random.Generator(np.random.PCG64(seq))
        return FieldVector(self.params.uniform(rng, self.d), self.params)

    def client_mask(self, k: int) -> FieldVector:
        """Net mask client k applies: + for higher-indexed peers, - for lower."""
        mask = FieldVector.zeros(self.d, self.params)
        for other in self.participants:
            if other == k:
                continue
            if k < other:
                mask = mask.add(self.pair_mask(k, other))
            else:
                mask = mask.sub(self.pair_mask(other, k))
        return mask


def secagg_sum(inputs: dict, session: SecAggSession) -> FieldVector:
    """Field sum of the client inputs; the log sees only masked vectors.

    The output is computed by summing the masked submissions, so mask
    cancellation is structural rather than assumed.
    """
    if set(inputs) != set(session.participants):
        raise ProtocolAbortError(
            f"round {session.round_id}: submissions {sorted(inputs)} do not match "
            f"participants {list(session.participants)}"
        )
    # one pass over unordered pairs: each mask is generated once and applied
    # with opposite signs to its two endpoints
    masks = {k: FieldVector.zeros(session.d, session.params)
             for k in session.participants}
    pts = session.participants
    for a in range(len(pts)):
        for b in range(a + 1, len(pts)):
            m = session.pair_mask(pts[a], pts[b])
            masks[pts[a]] = masks[pts[a]].add(m)
            masks[pts[b]] = masks[pts[b]].sub(m)
    acc = FieldVector.zeros(session.d, session.params)
    for k in session.participants:
        vec = inputs[k]
        session.params._check(vec.params)
        if len(vec) != session.d:
            raise ProtocolAbortError(
                f"round {session.round_id}: client {k} submitted length {len(vec)}, "
                f"expected {session.d}"
            )
        masked = vec.add(masks[k])
        session.observations.append((k, masked.values.copy()))
        acc = acc.add(masked)
    session.output = acc
    return acc


def secagg_scalar(inputs: dict, session: SecAggSession) -> int:
    """Scalar (d = 1) secure sum."""
    if session.d != 1:
        raise ConfigurationError("secagg_scalar requires a d=1 session")
    vec_inputs = {
        k: FieldVector(np.array([v], dtype=np.uint64), session.params)
        for k, v in inputs.items()
    }
    return int(secagg_sum(vec_inputs, session).values[0])


def write_observation_log(session: SecAggSession, path):
    """Newline-delimited audit records: round, client, masked-vector digest."""
    with open(path, "a") as fh:
        for client, masked in session.observations:
            digest = hashlib.sha256(masked.astype("<u8").tobytes()).hexdigest()
            fh.write(json.dumps(
                {"round": session.round_id, "client": client, "digest": digest}
            ) + "\n")
