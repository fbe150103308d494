"""
Metastability-aware circuit primitives.

A signal level is a plain ``0``/``1`` or a :class:`Metastable` value that
settles to ``resolves_to`` at ``resolve_at``. Flops capture cleanly unless
their input moved inside the open window ``(edge - setup, edge + hold)``;
then the output is metastable for ``clk_to_q`` plus an exponential draw with
mean ``tau``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Union

from .kernel import ClockDomain, ConfigError, SimTime, next_edge


class Metastable(NamedTuple):
    resolve_at: SimTime
    resolves_to: int


LogicLevel = Union[int, Metastable]


class ProtocolError(RuntimeError):
    """A handshake was driven out of turn."""


class MetastabilityEscape(RuntimeError):
    """Unresolved metastability reached the last synchronizer stage (strict mode)."""


@dataclass(frozen=True)
class FlopTimings:
    """Flop timing constants, all in picoseconds.

    ``t0`` is the metastability window constant used only by :func:`mtbf`.
    ``clk_to_q >= hold`` is required so back-to-back flops in a chain never
    violate each other's hold time.
    """

    setup: int = 20
    hold: int = 10
    clk_to_q: int = 30
    tau: float = 15.0
    t0: float = 30.0

    def __post_init__(self):
        if min(self.setup, self.hold, self.clk_to_q, self.t0) < 0:
            raise ConfigError("flop timings must be non-negative")
        if self.tau <= 0:
            raise ConfigError("tau must be positive")
        if self.clk_to_q < self.hold:
            raise ConfigError("clk_to_q must be >= hold for a safe flop chain")


def resolution_delay(tau: float, rng: random.Random) -> int:
    """Whole-picosecond exponential settling time, at least 1 ps."""
    return max(1, math.ceil(rng.expovariate(1.0 / tau)))


def ff_sample(timings: FlopTimings, d: LogicLevel, last_d_transition: SimTime, clk_edge: SimTime,
              rng: random.Random) -> LogicLevel:
    """Capture ``d`` at ``clk_edge``.

    A metastable input that has not settled by ``clk_edge - setup`` counts as
    a violation, so metastability propagates rather than silently clearing.
    """
    if clk_edge < 0:
        raise ValueError("clk_edge must be non-negative")
    if isinstance(d, Metastable):
        if d.resolve_at > clk_edge - timings.setup:
            return _fresh(timings, clk_edge, rng)
        last_d_transition = max(last_d_transition, d.resolve_at)
        d = d.resolves_to
    if clk_edge - timings.setup < last_d_transition < clk_edge + timings.hold:
        return _fresh(timings, clk_edge, rng)
    return d


def _fresh(timings: FlopTimings, clk_edge: SimTime, rng: random.Random) -> Metastable:
    return Metastable(clk_edge + timings.clk_to_q + resolution_delay(timings.tau, rng), rng.getrandbits(1))


def mtbf(timings: FlopTimings, f_clk: float, f_data: float, t_resolve: float) -> float:
    """Mean time between failures in seconds; ``t_resolve`` in ps, rates in Hz."""
    if f_clk <= 0 or f_data <= 0:
        raise ValueError("clock and data rates must be positive")
    return math.exp(t_resolve / timings.tau) / (timings.t0 * 1e-12 * f_clk * f_data)


class SyncBus:
    """A bus of per-bit brute-force synchronizer chains.

    The source side calls :meth:`drive` with each new value and the time it
    reaches the first flop. The receiving clock calls :meth:`clock` once per
    rising edge; it returns the value the receiving logic sees during the
    cycle ending at that edge (the last stage before the shift), then shifts.

    Only the most recent source update can be inside a sampling window;
    earlier ones are at least a source period old and have settled. Bits
    changed by that update go metastable when it lands inside the window or
    when it was flagged ``forced`` by stress injection.

    ``ideal`` disables metastability entirely (a value is captured iff it
    arrived by the edge).
    """

    def __init__(self, width: int, stages: int, timings: FlopTimings, rng: random.Random,
                 init: int = 0, ideal: bool = False, strict: bool = False):
        if stages < 1:
            raise ConfigError("a synchronizer needs at least one stage")
        self.width = width
        self.n = stages
        self.timings = timings
        self.rng = rng
        self.ideal = ideal
        self.strict = strict
        self.src = init
        self.prev = init
        self.arrival = -(1 << 62)
        self.forced = False
        self.seen = True
        self.stages = [init] * stages
        # per stage: None or list of (bit_mask, resolve_at)
        self.meta: list[Optional[list[tuple[int, int]]]] = [None] * stages
        self._settling = 0
        self.metastable_events = 0
        self.escapes = 0

    def drive(self, value: int, arrival: SimTime, forced: bool = False) -> None:
        self.prev = self.src
        self.src = value
        self.arrival = arrival
        self.forced = forced
        self.seen = False

    def clock(self, t: SimTime) -> int:
        stages = self.stages
        out = stages[-1]
        if self.seen and not self._settling:
            return out
        meta = self.meta
        setup = self.timings.setup
        if meta[-1] is not None:
            for _, resolve_at in meta[-1]:
                if resolve_at > t - setup:
                    self.escapes += 1
                    if self.strict:
                        raise MetastabilityEscape(f"unresolved metastability at final stage, t={t} ps")
        for i in range(self.n - 1, 0, -1):
            stages[i] = stages[i - 1]
            m = meta[i - 1]
            meta[i] = self._propagate(m, stages, i, t) if m is not None else None
        self._sample_source(t)
        if meta[0] is not None or any(m is not None for m in meta):
            self._settling = self.n
        elif self._settling:
            self._settling -= 1
        return out

    def _propagate(self, entries, stages, i, t):
        setup = self.timings.setup
        fresh = None
        for mask, resolve_at in entries:
            if resolve_at <= t - setup:
                continue
            bit = 1 if stages[i] & mask else 0
            lvl = ff_sample(self.timings, Metastable(resolve_at, bit), t, t, self.rng)
            self.metastable_events += 1
            if lvl.resolves_to:
                stages[i] |= mask
            else:
                stages[i] &= ~mask
            if fresh is None:
                fresh = []
            fresh.append((mask, lvl.resolve_at))
        return fresh

    def _sample_source(self, t: SimTime) -> None:
        stages = self.stages
        self.meta[0] = None
        if self.seen:
            stages[0] = self.src
            return
        tm = self.timings
        if self.ideal:
            if self.arrival <= t:
                stages[0] = self.src
                self.seen = True
                self._settling = self.n
            else:
                stages[0] = self.prev
            return
        if self.arrival >= t + tm.hold:
            stages[0] = self.prev
            return
        self.seen = True
        self._settling = self.n
        edge_at = t if self.forced else self.arrival
        if edge_at <= t - tm.setup:
            stages[0] = self.src
            return
        value = self.src
        changed = self.src ^ self.prev
        entries = []
        bit = 0
        while changed:
            if changed & 1:
                mask = 1 << bit
                lvl = ff_sample(tm, 1 if value & mask else 0, edge_at, t, self.rng)
                if isinstance(lvl, Metastable):
                    self.metastable_events += 1
                    entries.append((mask, lvl.resolve_at))
                    value = value | mask if lvl.resolves_to else value & ~mask
            changed >>= 1
            bit += 1
        stages[0] = value
        self.meta[0] = entries or None


@dataclass
class ChainOutput:
    """Output waveform of a synchronizer chain."""

    transitions: list[tuple[SimTime, int]]
    escapes: int
    metastable_events: int


def sync_chain(n_stages: int, input_events: Sequence[tuple[SimTime, int]], rx_clock: ClockDomain,
               timings: FlopTimings, rng: random.Random, until: Optional[SimTime] = None,
               force_rate: float = 0.0, init: int = 0, jitter_rng: Optional[random.Random] = None,
               strict: bool = False) -> ChainOutput:
    """Re-time a one-bit waveform into ``rx_clock`` through ``n_stages`` flops.

    ``input_events`` are ``(time, level)`` transitions at the first flop's
    input. With ``force_rate`` > 0 that fraction of transitions is treated as
    landing inside the setup/hold window of the edge that first samples it.
    Output transitions are stamped at ``edge + clk_to_q``.
    """
    if n_stages < 2:
        raise ConfigError("a synchronizer chain needs at least two stages")
    events = list(input_events)
    if any(a[0] > b[0] for a, b in zip(events, events[1:])):
        raise ValueError("input transitions must be time-ordered")
    if until is None:
        last = events[-1][0] if events else 0
        until = last + (n_stages + 3) * rx_clock.period
    bus = SyncBus(1, n_stages, timings, rng, init=init, strict=strict)
    jitter_rng = jitter_rng or random.Random(0)
    out: list[tuple[SimTime, int]] = []
    level = init
    k = 0
    n = 0
    while True:
        t = next_edge(rx_clock, n, jitter_rng)
        if t > until:
            break
        while k < len(events) and events[k][0] < t + timings.hold:
            when, value = events[k]
            if value != bus.src:
                forced = force_rate > 0 and rng.random() < force_rate
                bus.drive(value, when, forced)
            k += 1
        bus.clock(t)
        if bus.stages[-1] != level:
            level = bus.stages[-1]
            out.append((t + timings.clk_to_q, level))
        n += 1
    return ChainOutput(out, bus.escapes, bus.metastable_events)


@dataclass
class MutexState:
    """Two-party mutual-exclusion element.

    ``pending`` maps a requester (``"a"``/``"b"``) to its request time.
    """

    grant_a: bool = False
    grant_b: bool = False
    pending: dict = field(default_factory=dict)
    delay: int = 10
    grants: int = 0

    def request(self, side: str, t: SimTime) -> None:
        if side not in ("a", "b"):
            raise ValueError(side)
        self.pending[side] = t

    def release(self, side: str, t: SimTime) -> Optional[tuple[str, SimTime]]:
        """Drop ``side``'s grant; a waiting requester is granted next."""
        if not getattr(self, f"grant_{side}"):
            raise ProtocolError(f"mutex release by {side} without grant")
        setattr(self, f"grant_{side}", False)
        other = "b" if side == "a" else "a"
        if other in self.pending:
            req = self.pending.pop(other)
            self._grant(other)
            return other, max(t, req) + self.delay
        return None

    def _grant(self, side: str) -> None:
        if self.grant_a or self.grant_b:
            raise ProtocolError("mutual exclusion violated")
        setattr(self, f"grant_{side}", True)
        self.grants += 1


def mutex_arbitrate(state: MutexState, req_a_time: SimTime, req_b_time: SimTime, aperture: int,
                    tau: float, rng: random.Random) -> tuple[str, SimTime]:
    """Decide between two pending requests.

    Requests further apart than ``aperture`` go to the earlier one. Closer
    requests are decided by a fair coin after an extra exponential settling
    time; the grant itself is never metastable.
    """
    if state.grant_a or state.grant_b:
        raise ProtocolError("arbitration while a grant is outstanding")
    state.pending["a"] = req_a_time
    state.pending["b"] = req_b_time
    grant_time = max(req_a_time, req_b_time) + state.delay
    if abs(req_a_time - req_b_time) > aperture:
        winner = "a" if req_a_time < req_b_time else "b"
    else:
        winner = "a" if rng.getrandbits(1) else "b"
        grant_time += resolution_delay(tau, rng)
    del state.pending[winner]
    state._grant(winner)
    return winner, grant_time


@dataclass
class PausibleClockGen:
    """Mutex-gated clock generator state.

    The guard window of an edge is ``(edge - setup, edge + hold)`` of the
    synchronizing latch. Pauses accumulate into ``offset`` so later edges keep
    their spacing, as a restarted ring oscillator would.
    """

    setup: int = 20
    hold: int = 10
    aperture: int = 30
    tau: float = 15.0
    mutex_delay: int = 10
    offset: int = 0
    pauses: int = 0
    max_pause: int = 0

    def __post_init__(self):
        self.mutex = MutexState(delay=self.mutex_delay)

    def in_window(self, edge: SimTime, arrival: SimTime) -> bool:
        return edge - self.setup < arrival < edge + self.hold


def pausible_next_edge(gen: PausibleClockGen, nominal_edge: SimTime, request: Optional[SimTime],
                       rng: random.Random) -> SimTime:
    """Return the edge actually issued for ``nominal_edge``.

    ``request`` is the arrival time of an asynchronous input (or None). When
    it falls in the guard window the mutex arbitrates between it and the
    clock; the clock holds until the grant and issues its edge ``setup``
    later, so the input is stable at the latch and no sample is metastable.
    """
    if request is None or not gen.in_window(nominal_edge, request):
        return nominal_edge
    mutex = gen.mutex
    winner, grant = mutex_arbitrate(mutex, request, nominal_edge, gen.aperture, gen.tau, rng)
    # the loser is granted as soon as the winner lets go; both finish before the edge
    loser, _ = mutex.release(winner, grant)
    mutex.release(loser, grant)
    edge = grant + gen.setup
    gen.pauses += 1
    return edge


def c_element(a: int, b: int, prev: int) -> int:
    """Muller C-element: follow the inputs when they agree, else hold."""
    if a == b:
        return a
    return prev


@dataclass
class TwoPhaseChannel:
    """Transition-signalled req/ack pair carrying one event at a time."""

    req_level: int = 0
    ack_level: int = 0
    req_toggles: int = 0
    ack_toggles: int = 0

    @property
    def pending(self) -> bool:
        return self.req_level != self.ack_level


def two_phase_toggle(ch: TwoPhaseChannel, side: str) -> TwoPhaseChannel:
    if side == "req":
        if ch.pending:
            raise ProtocolError("req toggled while a transfer is pending")
        ch.req_level ^= 1
        ch.req_toggles += 1
    elif side == "ack":
        if not ch.pending:
            raise ProtocolError("ack toggled with no transfer pending")
        ch.ack_level ^= 1
        ch.ack_toggles += 1
    else:
        raise ValueError(f"side must be 'req' or 'ack', not {side!r}")
    return ch
