"""Small deterministic helpers shared across modules."""

from __future__ import annotations

import hashlib
import json
from typing import Any


def derive_seed(*parts: Any) -> int:
    """Fold arbitrary labels into a 63-bit seed, stably across runs and platforms."""
    payload = "\x1f".join(str(p) for p in parts).encode("utf-8")
    digest = hashlib.sha256(payload).digest()
    return int.from_bytes(digest[:8], "big") >> 1


def stable_unit(text: str) -> float:
    """Map a string to [0,1) via sha256; used for content-keyed pseudo-randomness."""
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") / 2.0**64


def canonical_digest(obj: Any, length: int = 16) -> str:
    """Hex digest of the canonical JSON form of ``obj``."""
    payload = json.dumps(obj, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()[:length]
