from __future__ import annotations

from Crypto.Hash import keccak as _keccak

WORD_MASK = (1 << 256) - 1


def keccak256(data: bytes) -> bytes:
    h = _keccak.new(digest_bits=256)
    h.update(data)
    return h.digest()


def keccak_words(words: list[int] | tuple[int, ...]) -> int:
    """Hash of the big-endian concatenation of 256-bit words, as an integer."""
    data = b"".join((w & WORD_MASK).to_bytes(32, "big") for w in words)
    return int.from_bytes(keccak256(data), "big")


def selector(signature: str) -> int:
    """4-byte function selector of a canonical signature such as ``withdraw(uint256)``."""
    return int.from_bytes(keccak256(signature.encode())[:4], "big")
