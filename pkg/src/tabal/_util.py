"""Small shared helpers: seed derivation, ranking, number formatting."""

from __future__ import annotations

import hashlib

import numpy as np


def derive_seed(*parts) -> int:
    """Stable unsigned 64-bit seed from a tuple of labels.

    Independent of process state and platform, so runs scheduled in any
    order (or in parallel) see identical randomness.
    """
    text = "\x1f".join(str(p) for p in parts)
    digest = hashlib.blake2b(text.encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "big")


def rankdata(values) -> np.ndarray:
    """Ranks starting at 1, with tied values sharing their average rank."""
    values = np.asarray(values, dtype=float)
    order = np.argsort(values, kind="stable")
    ranks = np.empty(values.size, dtype=float)
    i = 0
    while i < values.size:
        j = i
        while j + 1 < values.size and values[order[j + 1]] == values[order[i]]:
            j += 1
        ranks[order[i : j + 1]] = (i + j) / 2.0 + 1.0
        i = j + 1
    return ranks


def fmt6(x) -> str:
    """Locale-independent 6-significant-digit rendering; blank for missing."""
    if x is None:
        return ""
    x = float(x)
    if not np.isfinite(x):
        return ""
    return format(x, ".6g")
