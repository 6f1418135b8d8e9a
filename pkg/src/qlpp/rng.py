"""Deterministic random-stream derivation.

All randomness in the package flows from a single integer seed. Independent
streams are derived as (seed, *path) with integer path components, e.g. one
stream per Monte Carlo replication and one per MCMC chain, so results never
depend on scheduling order.
"""
from __future__ import annotations

import numpy as np

__all__ = ["rng_stream"]


def rng_stream(seed: int, *path: int) -> np.random.Generator:
    """Counter-based generator for the stream identified by (seed, *path)."""
    ss = np.random.SeedSequence(int(seed), spawn_key=tuple(int(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
