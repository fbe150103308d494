"""
Brute-force synchronized FIFOs: the Gray-pointer design and a binary-pointer
negative control with the same structure.

Each side keeps its own pointer in binary (the only copy it ever writes) plus
the coded copy that crosses the domain boundary through a per-bit
:class:`~cdcsim.elements.SyncBus`. Flags are computed from the pointer value
the synchronizer presents during the cycle ending at the current edge. Reads
go through a registered RAM port, so a word popped at one read edge leaves
the FIFO at the next.

The binary shadow counters ``wbin``/``rbin`` double as the verification
oracle: they give the true occupancy used by the conservatism and staleness
checks.
"""

from __future__ import annotations

import random
from typing import Optional

from ..elements import FlopTimings, SyncBus
from ..graycode import decode_table, full_mask, pointer_width
from .config import CorruptWord


class GrayFifo:
    """Bisynchronous FIFO with Gray pointers and brute-force synchronizers.

    ``edge`` arguments are edge timestamps; the FIFO forwards them to its
    synchronizers and never uses them in a decision.
    """

    def __init__(self, depth: int, sync_stages: int = 2, timings: Optional[FlopTimings] = None,
                 rng: Optional[random.Random] = None, stress_rate: float = 0.0,
                 stress_rng: Optional[random.Random] = None, ideal: bool = False, strict: bool = False):
        self.depth = depth
        self.width = pointer_width(depth)
        self.ptr_mask = (1 << self.width) - 1
        self.slot_mask = depth - 1
        self.timings = timings = timings or FlopTimings()
        rng = rng or random.Random(0)
        self.stress_rate = stress_rate
        self.stress_rng = stress_rng or random.Random(1)
        self.mem: list = [None] * depth
        self.wbin = self.rbin = 0
        self.wptr = self.rptr = 0  # coded pointers
        self.w2r = SyncBus(self.width, sync_stages, timings, _fork(rng, "w2r"), ideal=ideal, strict=strict)
        self.r2w = SyncBus(self.width, sync_stages, timings, _fork(rng, "r2w"), ideal=ideal, strict=strict)
        self.decode = self._decode_table()
        self.full_pattern = full_mask(self.width)
        self.out_reg = None
        self.rptr_view = 0  # binary value of the synchronized read pointer, writer side
        self.wptr_view = 0
        self.flag_violations = 0
        self.stale_violations = 0
        self.overflows = 0
        self.underflows = 0

    def _decode_table(self) -> list[int]:
        return decode_table(self.width)

    def encode(self, x: int) -> int:
        return x ^ (x >> 1)

    def is_full(self, wptr: int, rptr_synced: int) -> bool:
        return wptr ^ rptr_synced == self.full_pattern

    def is_empty(self, rptr: int, wptr_synced: int) -> bool:
        return rptr == wptr_synced

    @property
    def occupancy(self) -> int:
        return (self.wbin - self.rbin) & self.ptr_mask

    def _forced(self) -> bool:
        rate = self.stress_rate
        return rate > 0 and (rate >= 1 or self.stress_rng.random() < rate)

    def write_cycle(self, offer, edge: int) -> tuple[bool, bool]:
        """One write-clock edge. Returns ``(accepted, full)``."""
        synced = self.r2w.clock(edge)
        full = self.is_full(self.wptr, synced)
        view = self.decode[synced]
        self.rptr_view = view
        if not full and self.occupancy >= self.depth:
            self.flag_violations += 1
        if (self.rbin - view) & self.ptr_mask > self.depth:
            self.stale_violations += 1
        if offer is None or full:
            return False, full
        slot = self.wbin & self.slot_mask
        if self.mem[slot] is not None:
            self.overflows += 1
        self.mem[slot] = offer
        self.wbin = (self.wbin + 1) & self.ptr_mask
        self.wptr = self.encode(self.wbin)
        self.w2r.drive(self.wptr, edge + self.timings.clk_to_q, self._forced())
        return True, full

    def read_cycle(self, ready: bool, edge: int) -> tuple[object, bool]:
        """One read-clock edge. Returns ``(word leaving the read port or None, empty)``."""
        word = self.out_reg
        self.out_reg = None
        synced = self.w2r.clock(edge)
        empty = self.is_empty(self.rptr, synced)
        view = self.decode[synced]
        self.wptr_view = view
        if not empty and self.occupancy == 0:
            self.flag_violations += 1
        if (self.wbin - view) & self.ptr_mask > self.depth:
            self.stale_violations += 1
        if ready and not empty:
            slot = self.rbin & self.slot_mask
            popped = self.mem[slot]
            if popped is None:
                self.underflows += 1
                popped = CorruptWord(slot)
            self.mem[slot] = None
            self.out_reg = popped
            self.rbin = (self.rbin + 1) & self.ptr_mask
            self.rptr = self.encode(self.rbin)
            self.r2w.drive(self.rptr, edge + self.timings.clk_to_q, self._forced())
        return word, empty

    @property
    def metastable_events(self) -> int:
        return self.w2r.metastable_events + self.r2w.metastable_events

    @property
    def escapes(self) -> int:
        return self.w2r.escapes + self.r2w.escapes


class UnsafeBinaryFifo(GrayFifo):
    """Same machine with plain binary pointers crossing the boundary.

    A multi-bit increment caught mid-flight can be captured torn, so the
    flags can be optimistic. Used only as a negative control.
    """

    def _decode_table(self) -> list[int]:
        return list(range(1 << self.width))

    def encode(self, x: int) -> int:
        return x

    def is_full(self, wptr: int, rptr_synced: int) -> bool:
        return (wptr - rptr_synced) & self.ptr_mask == self.depth


def _fork(rng: random.Random, label: str) -> random.Random:
    fork = getattr(rng, "fork", None)
    if fork is not None:
        return fork(label)
    return random.Random(f"{rng.random()}/{label}")
