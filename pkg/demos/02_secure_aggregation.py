"""Simulated secure aggregation with pairwise masks.

The server's view is only the masked submissions; masks cancel pairwise
so the logged sum still equals the exact field sum of the raw inputs.
"""

import numpy as np

from twmark.field import FieldParams, FieldVector
from twmark.secagg import SecAggSession, secagg_sum

rng = np.random.default_rng(1)
params = FieldParams()
d, participants = 6, (1, 2, 3, 4)

session = SecAggSession(round_id=1, participants=participants, d=d,
                        params=params, session_seed=42)
inputs = {k: FieldVector(params.uniform(rng, d), params) for k in participants}

out = secagg_sum(inputs, session)

plain = FieldVector.zeros(d, params)
for v in inputs.values():
    plain = plain.add(v)
print("masked-sum output == plain field sum:", out == plain)

for k, masked in session.observations:
    hidden = not np.array_equal(masked, inputs[k].values)
    print(f"client {k}: server sees a masked vector (raw hidden: {hidden})")

# the net masks cancel structurally
total = FieldVector.zeros(d, params)
for k in participants:
    total = total.add(session.client_mask(k))
print("net masks sum to zero:", total == FieldVector.zeros(d, params))
