"""Protocol-wide digest.

Every commitment, measurement, trace state and VRF output in the package goes
through :func:`digest` so values are comparable across modules.
"""

from __future__ import annotations

import hashlib

DIGEST_SIZE = 32


def H(data: bytes) -> bytes:
    """Plain SHA-256 of ``data``."""
    return hashlib.sha256(data).digest()


def digest(tag: bytes, *parts: bytes) -> bytes:
    """Domain-separated SHA-256 over length-prefixed parts."""
    h = hashlib.sha256(tag)
    for part in parts:
        h.update(len(part).to_bytes(4, "big"))
        h.update(part)
    return h.digest()


def u64(x: int) -> bytes:
    return int(x).to_bytes(8, "big", signed=False)


def hexd(b: bytes) -> str:
    return b.hex()
