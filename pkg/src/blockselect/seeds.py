"""Named sub-seed derivation from one global seed."""

import hashlib


def derive_seed(seed: int, name: str) -> int:
    """``sub_seed = sha256("<seed>:<name>")`` truncated to 32 bits."""
    digest = hashlib.sha256(f"{int(seed)}:{name}".encode()).digest()
    return int.from_bytes(digest[:4], "little")
