"""Splittable, role-keyed random streams.

Every stochastic routine draws from a generator keyed by
(master seed, replication index, stream role), so replications run in
parallel without sharing state and rerunning any single replication
reproduces it bit for bit.
"""

import numpy as np

STREAM_ROLES = {
    "diffusion": 0,
    "jumps": 1,
    "noise": 2,
    "chain": 3,
    "aux": 4,
}


def stream(master_seed: int, replication: int, role: str) -> np.random.Generator:
    """Independent generator for one (replication, role) pair."""
    if role not in STREAM_ROLES:
        raise ValueError(f"unknown stream role {role!r}")
    ss = np.random.SeedSequence(master_seed, spawn_key=(replication, STREAM_ROLES[role]))
    return np.random.default_rng(ss)
