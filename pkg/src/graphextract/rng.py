"""Named random substreams derived from a single root seed.

Every randomized component draws from its own stream so that toggling one
feature (say, the perturbation scorer) never shifts the randomness seen by
another. Streams are keyed by a fixed name plus optional integer qualifiers
(cycle index, trial index), so results are independent of evaluation order.
"""

import numpy as np

# Fixed ids; appending new names is fine, reordering is not (it would
# silently change every derived stream).
_STREAM_IDS = {
    "data": 0,
    "partition": 1,
    "target": 2,
    "init": 3,
    "selector": 4,
    "perturb": 5,
    "kmeans": 6,
    "final": 7,
    "interim": 8,
    "stability": 9,
    "init_query": 10,
}


def substream_seed(root_seed: int, name: str, *extra: int) -> int:
    """Derive a deterministic integer seed for the named substream."""
    try:
        sid = _STREAM_IDS[name]
    except KeyError:
        raise KeyError(f"unknown stream name {name!r}") from None
    ss = np.random.SeedSequence((int(root_seed), sid) + tuple(int(e) for e in extra))
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def substream(root_seed: int, name: str, *extra: int) -> np.random.Generator:
    """Generator for the named substream of ``root_seed``."""
    return np.random.default_rng(substream_seed(root_seed, name, *extra))
