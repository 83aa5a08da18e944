"""Deterministic seed derivation for experiment orchestration.

Per-task seeds come from (master seed, task label) through SHA-256, so tasks
can run in any order or in parallel without seed collisions and any artifact
can be regenerated from its manifest.
"""

from __future__ import annotations

import hashlib


def derive_seed(master: int, label: str) -> int:
    digest = hashlib.sha256(f"{master}:{label}".encode()).digest()
    return int.from_bytes(digest[:8], "big") >> 1
