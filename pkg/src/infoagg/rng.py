"""Keyed random streams.

Every draw in a simulation comes from a Philox generator keyed by
(seed, replication, stream). Philox is counter-based, so a replication's
shocks do not depend on which worker runs it or in what order.
"""

import numpy as np

THETA = 0
COMMON = 1        # report errors eps_k
PRIVATE = 2       # private-signal noise xi_i
READING = 3       # reading noise tau_ik
ANSWER = 4        # chatbot answer noise


def stream(seed: int, rep: int, stream_id: int) -> np.random.Generator:
    key = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, int(rep), int(stream_id)])
    return np.random.Generator(np.random.Philox(key))
