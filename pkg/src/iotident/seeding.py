"""Deterministic seed derivation.

Every randomized component takes an explicit integer seed; nested jobs
(trees in a forest, device forests, sweep windows) derive child seeds by
hashing the parent seed with a textual tag. Derived seeds are stable
across runs, platforms and execution order, so parallel and serial
schedules produce identical results.
"""

from __future__ import annotations

import hashlib


def derive_seed(base_seed: int, *tags) -> int:
    text = str(int(base_seed)) + "".join(f"/{t}" for t in tags)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")
