"""Reflected-binary Gray code and Gray-pointer full/empty tests.

FIFO pointers carry one extra wrap bit, so a depth-``D`` FIFO uses
``width = log2(D) + 1`` bit pointers.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple


class GrayValue(NamedTuple):
    bits: int
    width: int


def pointer_width(depth: int) -> int:
    if depth < 2 or depth & (depth - 1):
        raise ValueError(f"depth must be a power of two >= 2, got {depth}")
    return depth.bit_length()


def bin_to_gray(x: int, width: int) -> GrayValue:
    if not 0 <= x < (1 << width):
        raise ValueError(f"{x} does not fit in {width} bits")
    return GrayValue(x ^ (x >> 1), width)


def gray_to_bin(g: GrayValue) -> int:
    bits, width = g
    if not 0 <= bits < (1 << width):
        raise ValueError(f"{bits} does not fit in {width} bits")
    x = bits
    shift = 1
    while shift < width:
        x ^= x >> shift
        shift <<= 1
    return x


def full_mask(width: int) -> int:
    """Bit pattern that separates a full write pointer from the read pointer."""
    return 0b11 << (width - 2)


def gray_full(wptr: GrayValue, rptr_synced: GrayValue) -> bool:
    """Full iff the pointers differ in exactly the two top bits."""
    if wptr.width != rptr_synced.width:
        raise ValueError("pointer widths differ")
    if wptr.width < 2:
        raise ValueError("pointer width must be >= 2")
    return wptr.bits ^ rptr_synced.bits == full_mask(wptr.width)


def gray_empty(rptr: GrayValue, wptr_synced: GrayValue) -> bool:
    if rptr.width != wptr_synced.width:
        raise ValueError("pointer widths differ")
    return rptr.bits == wptr_synced.bits


def decode_table(width: int) -> list[int]:
    """``table[g]`` is the binary value of Gray code ``g``."""
    table = [0] * (1 << width)
    for x in range(1 << width):
        table[x ^ (x >> 1)] = x
    return table


@dataclass
class GrayCheck:
    width: int
    codes: int
    bijective: bool
    single_bit_steps: bool
    full_empty_agree: bool
    pairs_checked: int

    @property
    def ok(self) -> bool:
        return self.bijective and self.single_bit_steps and self.full_empty_agree


def exhaustive_check(width: int, brute_pairs_up_to: int = 9) -> GrayCheck:
    """Check the code and the full/empty tests against binary arithmetic.

    Every pointer value is visited. Because the code is checked to be a
    bijection, ``gray_full(w, r)`` holds for exactly one ``r`` per ``w``;
    that ``r`` must be ``w - depth``, and ``gray_empty`` can only hold for
    ``r == w``. For widths up to ``brute_pairs_up_to`` every (w, r) pair is
    additionally compared directly.
    """
    if width < 2:
        raise ValueError("pointer width must be >= 2")
    size = 1 << width
    depth = size >> 1
    mask = full_mask(width)
    codes = [x ^ (x >> 1) for x in range(size)]
    bijective = len(set(codes)) == size and all(
        gray_to_bin(GrayValue(g, width)) == x for x, g in enumerate(codes))
    single = all(bin(codes[x] ^ codes[(x + 1) % size]).count("1") == 1 for x in range(size))
    inverse = [0] * size
    for x, g in enumerate(codes):
        inverse[g] = x
    agree = all(inverse[codes[w] ^ mask] == (w - depth) % size for w in range(size))
    pairs = 0
    if agree and width <= brute_pairs_up_to:
        for w in range(size):
            gw = GrayValue(codes[w], width)
            for r in range(size):
                gr = GrayValue(codes[r], width)
                occ = (w - r) % size
                if gray_full(gw, gr) != (occ == depth) or gray_empty(gr, gw) != (occ == 0):
                    agree = False
                pairs += 1
    return GrayCheck(width, size, bijective, single, agree, pairs)
