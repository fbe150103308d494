"""
Pausible bisynchronous FIFO.

Pointer updates cross the boundary as two-phase toggles instead of coded
pointers. Writes toggle one of ``credit_pairs`` increment channels
round-robin; the reader acknowledges each increment as soon as its latch
captures it. Reads toggle one of ``credit_pairs`` read-increment channels,
acknowledged the same way by the writer. A channel carries one event at a
time, so outstanding increments per direction never exceed ``credit_pairs``.

Toggles are captured by a latch whose clock is mutex-gated: a toggle that
would land in an edge's guard window pauses that edge until it has settled,
so no sample is ever taken inside a setup/hold window.
"""

from __future__ import annotations

import random
from typing import Optional

from ..elements import (FlopTimings, Metastable, PausibleClockGen, TwoPhaseChannel, ff_sample,
                        pausible_next_edge, two_phase_toggle)
from .config import CorruptWord
from .gray import _fork

WRITE, READ = "write", "read"


class Toggle:
    __slots__ = ("arrival", "kind", "channel", "forced", "level")

    def __init__(self, arrival, kind, channel, forced, level):
        self.arrival = arrival
        self.kind = kind
        self.channel = channel
        self.forced = forced
        self.level = level


class PausibleFifo:
    def __init__(self, depth: int, credit_pairs: int = 2, timings: Optional[FlopTimings] = None,
                 rng: Optional[random.Random] = None, stress_rate: float = 0.0,
                 stress_rng: Optional[random.Random] = None, aperture: int = 30, mutex_delay: int = 10):
        self.depth = depth
        self.pairs = credit_pairs
        self.timings = timings = timings or FlopTimings()
        rng = rng or random.Random(0)
        self.latch_rng = _fork(rng, "latch")
        self.mutex_rng = {WRITE: _fork(rng, "mutex-w"), READ: _fork(rng, "mutex-r")}
        self.stress_rate = stress_rate
        self.stress_rng = stress_rng or random.Random(1)
        self.clocks = {
            side: PausibleClockGen(setup=timings.setup, hold=timings.hold, aperture=aperture,
                                   tau=timings.tau, mutex_delay=mutex_delay)
            for side in (WRITE, READ)
        }
        self.inbox: dict[str, list[Toggle]] = {WRITE: [], READ: []}
        self.mem: list = [None] * depth
        self.slot_mask = depth - 1
        # write-pointer increments (writer -> reader) and read-pointer increments (reader -> writer)
        self.inc = [TwoPhaseChannel() for _ in range(credit_pairs)]
        self.rinc = [TwoPhaseChannel() for _ in range(credit_pairs)]
        self.w_seen_ack = [0] * credit_pairs
        self.r_seen_ack = [0] * credit_pairs
        self.wptr = self.rptr = 0  # unbounded counts; slots are taken mod depth
        self.wptr_est = 0  # reader's knowledge of wptr
        self.rptr_est = 0  # writer's knowledge of rptr
        self.w_next = self.r_next = 0
        self.out_reg = None
        self.metastable_events = 0
        self.flag_violations = 0
        self.stale_violations = 0
        self.overflows = 0
        self.underflows = 0

    # -- clocking ---------------------------------------------------------

    def settle_edge(self, side: str, edge: int) -> Optional[int]:
        """Arbitrate pending toggles against an edge about to issue at ``edge``.

        Returns None when the edge may fire now, otherwise the paused edge
        time at which the caller must try again.
        """
        inbox = self.inbox[side]
        if not inbox:
            return None
        gen = self.clocks[side]
        hold = gen.hold
        lo = edge - gen.setup
        contender = None
        for tog in inbox:
            a = tog.arrival
            if tog.forced and a < edge + hold:
                # stress: push this transition into the guard window (later, never earlier)
                tog.forced = False
                if a <= lo:
                    a = tog.arrival = self.stress_rng.randint(lo + 1, edge + hold - 1)
            if lo < a < edge + hold and (contender is None or a < contender):
                contender = a
        if contender is None:
            return None
        return pausible_next_edge(gen, edge, contender, self.mutex_rng[side])

    def record_pause(self, side: str, pause: int) -> None:
        gen = self.clocks[side]
        gen.offset += pause
        if pause > gen.max_pause:
            gen.max_pause = pause

    def _send(self, side: str, edge: int, kind: str, channel: int, level: int) -> None:
        rate = self.stress_rate
        forced = rate > 0 and (rate >= 1 or self.stress_rng.random() < rate)
        self.inbox[side].append(Toggle(edge + self.timings.clk_to_q, kind, channel, forced, level))

    def _capture(self, side: str, edge: int) -> list[Toggle]:
        inbox = self.inbox[side]
        if not inbox:
            return inbox
        cutoff = edge - self.timings.setup
        got = [t for t in inbox if t.arrival <= cutoff]
        if got:
            self.inbox[side] = [t for t in inbox if t.arrival > cutoff]
            for tog in got:
                lvl = ff_sample(self.timings, tog.level, tog.arrival, edge, self.latch_rng)
                if isinstance(lvl, Metastable):
                    self.metastable_events += 1
        return got

    # -- datapath ---------------------------------------------------------

    def credits_free(self) -> int:
        return sum(ch.req_level == seen for ch, seen in zip(self.inc, self.w_seen_ack))

    def write_cycle(self, offer, edge: int) -> tuple[bool, int]:
        """One (possibly paused) write-clock edge. Returns ``(accepted, credits_free)``."""
        for tog in self._capture(WRITE, edge):
            k = tog.channel
            if tog.kind == "ack":
                self.w_seen_ack[k] ^= 1
            else:
                self.rptr_est += 1
                two_phase_toggle(self.rinc[k], "ack")
                self._send(READ, edge, "rack", k, self.rinc[k].ack_level)
        if self.rptr_est > self.rptr:
            self.stale_violations += 1
        k = self.w_next
        room = self.wptr - self.rptr_est < self.depth
        if room and self.wptr - self.rptr >= self.depth:
            self.flag_violations += 1
        accepted = False
        if offer is not None and room and self.inc[k].req_level == self.w_seen_ack[k]:
            slot = self.wptr & self.slot_mask
            if self.mem[slot] is not None:
                self.overflows += 1
            self.mem[slot] = offer
            self.wptr += 1
            two_phase_toggle(self.inc[k], "req")
            self._send(READ, edge, "inc", k, self.inc[k].req_level)
            self.w_next = (k + 1) % self.pairs
            accepted = True
        return accepted, self.credits_free()

    def read_cycle(self, ready: bool, edge: int) -> tuple[object, bool]:
        """One (possibly paused) read-clock edge. Returns ``(word leaving the read port or None, empty)``."""
        word = self.out_reg
        self.out_reg = None
        for tog in self._capture(READ, edge):
            k = tog.channel
            if tog.kind == "inc":
                self.wptr_est += 1
                two_phase_toggle(self.inc[k], "ack")
                self._send(WRITE, edge, "ack", k, self.inc[k].ack_level)
            else:
                self.r_seen_ack[k] ^= 1
        if self.wptr_est > self.wptr:
            self.stale_violations += 1
        empty = self.wptr_est == self.rptr
        if not empty and self.wptr == self.rptr:
            self.flag_violations += 1
        k = self.r_next
        if ready and not empty and self.rinc[k].req_level == self.r_seen_ack[k]:
            slot = self.rptr & self.slot_mask
            popped = self.mem[slot]
            if popped is None:
                self.underflows += 1
                popped = CorruptWord(slot)
            self.mem[slot] = None
            self.out_reg = popped
            self.rptr += 1
            two_phase_toggle(self.rinc[k], "req")
            self._send(WRITE, edge, "rinc", k, self.rinc[k].req_level)
            self.r_next = (k + 1) % self.pairs
        return word, empty

    @property
    def occupancy(self) -> int:
        return self.wptr - self.rptr

    @property
    def pauses(self) -> int:
        return self.clocks[WRITE].pauses + self.clocks[READ].pauses

    @property
    def max_pause(self) -> int:
        return max(self.clocks[WRITE].max_pause, self.clocks[READ].max_pause)

    @property
    def escapes(self) -> int:
        return 0
