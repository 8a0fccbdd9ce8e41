"""Deterministic seed derivation for order-independent Monte Carlo streams."""

import numpy as np


def child_seed(master, *path):
    """Derive an independent SeedSequence from a master seed and an index path.

    The same (master, path) pair always yields the same stream, and distinct
    paths yield statistically independent streams, so parallel work can be
    seeded up front without caring about execution order.

    Args:
        master: integer entropy or an existing SeedSequence to extend.
        *path: integers identifying the consumer (circuit index, trial
            block, ...).

    Returns:
        numpy.random.SeedSequence for the requested stream.
    """
    steps = tuple(int(p) for p in path)
    if isinstance(master, np.random.SeedSequence):
        return np.random.SeedSequence(
            master.entropy, spawn_key=tuple(master.spawn_key) + steps
        )
    return np.random.SeedSequence(int(master), spawn_key=steps)


def child_rng(master, *path):
    """Generator seeded by ``child_seed(master, *path)``."""
    return np.random.default_rng(child_seed(master, *path))
