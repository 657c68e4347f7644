"""Named random sub-streams derived from one top-level seed."""

import numpy as np

STREAMS = {"init": 0, "shuffle": 1, "augment": 2, "synth": 3, "baseline": 4, "eval": 5}


def stream(seed: int, name: str, *extra: int) -> np.random.Generator:
    """Independent generator for ``name``; ``extra`` ints further split the stream."""
    key = (STREAMS[name],) + tuple(int(e) for e in extra)
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=key))
