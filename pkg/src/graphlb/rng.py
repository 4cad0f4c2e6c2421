"""Seed handling.

Two documented generators, kept on separate sub-streams so graph construction
and simulation draws never interleave:

* graph generators use numpy's PCG64, seeded from ``SeedSequence((seed, tag))``
  where ``tag`` is a fixed per-family integer;
* the event-loop kernels use xoshiro256** (see ``_kernels``), whose 256-bit
  state is expanded by splitmix64 from a 64-bit stream seed derived here.

``derive_seed`` folds a base seed and an arbitrary sequence of labels through
splitmix64, so every (experiment, replication, purpose) tuple owns an
independent stream and reruns are reproducible from the base seed alone.
"""

from __future__ import annotations

import warnings

import numpy as np

from . import _kernels

_MASK64 = 0xFFFFFFFFFFFFFFFF
_SM_GAMMA = 0x9E3779B97F4A7C15
_SM_MIX1 = 0xBF58476D1CE4E5B9
_SM_MIX2 = 0x94D049BB133111EB

__all__ = ["derive_seed", "graph_rng", "kernel_state", "Stream"]


def _mix(z: int) -> int:
    z = (z ^ (z >> 30)) * _SM_MIX1 & _MASK64
    z = (z ^ (z >> 27)) * _SM_MIX2 & _MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *labels) -> int:
    """Fold labels (ints or strings) into a 64-bit sub-stream seed."""
    z = (int(base) ^ 0x5851F42D4C957F2D) & _MASK64
    for label in labels:
        if isinstance(label, str):
            parts = [b for b in label.encode()]
        else:
            parts = [int(label) & _MASK64]
        for p in parts:
            z = (z + _SM_GAMMA) & _MASK64
            z = _mix(z ^ (p & _MASK64))
    return _mix(z)


def graph_rng(seed: int, family_tag: int) -> np.random.Generator:
    """PCG64 generator for one graph-construction call."""
    ss = np.random.SeedSequence((int(seed) & _MASK64, int(family_tag)))
    return np.random.Generator(np.random.PCG64(ss))


class Stream:
    """Thin wrapper over a kernel xoshiro256** state for Python-side draws.

    Used by the single-call assignment operations so that they share the exact
    sampling code of the event loop.
    """

    def __init__(self, seed: int, *labels):
        self.state = kernel_state(derive_seed(seed, *labels) if labels else int(seed))

    def randbelow(self, n: int) -> int:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return int(_kernels._randbelow(self.state, n))

    def random(self) -> float:
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            return float(_kernels._rand_u53(self.state))


def kernel_state(stream_seed: int) -> np.ndarray:
    """Expand a 64-bit stream seed into a xoshiro256** state array."""
    state = np.empty(4, np.uint64)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        _kernels._seed_state(np.uint64(int(stream_seed) & _MASK64), state)
    if not state.any():  # all-zero state is the one forbidden point
        state[0] = np.uint64(1)
    return state
