"""Deterministic RNG substreams for sampling engines.

Counter-based Philox streams let every chunk of work (a block of RR sets,
a block of Monte-Carlo runs) own a disjoint, reproducible slice of
randomness.  Results are therefore identical no matter how the blocks are
scheduled.
"""

from __future__ import annotations

import numpy as np

# 2^128 draws per substream; Philox has a 256-bit counter so substream
# indices up to 2^128 never collide.
_STREAM_STRIDE_BITS = 128


def substream(seed: int, index: int) -> np.random.Generator:
    """Generator for the ``index``-th substream of ``seed``."""
    bg = np.random.Philox(key=np.uint64(seed & 0xFFFFFFFFFFFFFFFF),
                          counter=index << _STREAM_STRIDE_BITS)
    return np.random.Generator(bg)


def block_size_for(n_nodes: int) -> int:
    """Work-block size used by the batched sampling engines.

    A deterministic function of the node count only (never of available
    memory), so the substream layout -- and thus every sampled bit -- is
    reproducible across machines.  Sized to keep each block's visited
    matrix around 4 MB.
    """
    return max(64, min(4096, (1 << 22) // max(n_nodes, 1)))
