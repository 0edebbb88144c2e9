from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, *keys: int | str) -> int:
    """Derive a child seed from a master seed and a path of keys.

    The derivation hashes the decimal/text form of every component, so a given
    ``(master_seed, keys)`` pair always yields the same 63-bit seed regardless of
    how many other streams were derived before it.

    Args:
        master_seed: Root seed of the experiment.
        *keys: Path identifying the stream, e.g. ``("train", seed_index, k)``.

    Returns:
        Non-negative integer seed.
    """
    payload = "/".join([str(master_seed), *(str(key) for key in keys)])
    digest = hashlib.sha256(payload.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") >> 1
