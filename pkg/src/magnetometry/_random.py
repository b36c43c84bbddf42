"""Labelled seed derivation: every random stream descends from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def _label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def derive_seed(root_seed: int, label: str, *index: int) -> np.random.SeedSequence:
    """Seed sequence for stream ``label[index...]`` under ``root_seed``.

    The derivation depends only on its arguments, so streams can be created
    in any order (or in parallel) and still be reproducible.
    """
    if root_seed is None:
        raise ValueError("an explicit seed is required")
    key = (_label_key(label),) + tuple(int(i) for i in index)
    return np.random.SeedSequence(entropy=int(root_seed), spawn_key=key)


def derive_rng(root_seed: int, label: str, *index: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(root_seed, label, *index)))


def sub_seed(root_seed: int, label: str, *index: int) -> int:
    """A 63-bit integer summarising a derived stream, for provenance records."""
    return int(derive_seed(root_seed, label, *index).generate_state(2, np.uint64)[0] >> np.uint64(1))
