"""
Deterministic discrete-event core.

Time is an integer count of picoseconds. Events pop in ``(time, seq)`` order,
where ``seq`` is assigned at insertion, so simultaneous events dispatch in the
order they were scheduled. All randomness flows through :class:`SeededRng`
substreams so a run is reproducible from its seed alone.
"""

from __future__ import annotations

import heapq
import random
from collections import Counter
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, NamedTuple, Optional

SimTime = int

PPM = 10**6

#: default relative-frequency threshold separating plesiochronous from
#: heterochronous clock pairs
PLESIOCHRONOUS_PPM = 500


class ConfigError(ValueError):
    """Invalid simulation object (clock, FIFO, experiment)."""


class LivelockError(RuntimeError):
    """Too many events dispatched without simulation time advancing."""


class SeededRng(random.Random):
    """Mersenne Twister (``random.Random``) with labelled substreams.

    ``fork(label)`` seeds a child generator from the string ``"<seed>/<label>"``;
    CPython hashes string seeds with SHA-512, so children are stable across
    platforms and independent of how often the parent has been drawn from.
    """

    def __init__(self, seed: int | str = 0):
        self.seed_value = seed
        super().__init__(seed)

    def fork(self, label: str) -> "SeededRng":
        return SeededRng(f"{self.seed_value}/{label}")


@dataclass(frozen=True)
class ClockDomain:
    """A free-running clock: rising edges at ``phase + n*period`` plus drift and jitter.

    ``drift_ppm`` stretches the period (positive = slower clock). Jitter is a
    uniform integer draw on ``[-jitter, +jitter]`` per edge.
    """

    id: int
    period: SimTime
    phase: SimTime = 0
    jitter: SimTime = 0
    drift_ppm: Fraction = Fraction(0)

    def __post_init__(self):
        object.__setattr__(self, "drift_ppm", Fraction(self.drift_ppm))
        self.validate()

    def validate(self) -> None:
        if not isinstance(self.period, int) or self.period <= 0:
            raise ConfigError(f"clock {self.id}: period must be a positive integer, got {self.period!r}")
        if not 0 <= self.phase < self.period:
            raise ConfigError(f"clock {self.id}: phase must satisfy 0 <= phase < period, got {self.phase}")
        if self.jitter < 0 or 4 * self.jitter >= self.period:
            raise ConfigError(f"clock {self.id}: jitter must satisfy 0 <= jitter < period/4, got {self.jitter}")
        if self.drift_ppm <= -PPM:
            raise ConfigError(f"clock {self.id}: drift_ppm must exceed -1e6")

    @property
    def effective_period(self) -> Fraction:
        return self.period * (1 + self.drift_ppm / PPM)

    def nominal_edge(self, n: int) -> SimTime:
        """Edge ``n`` without jitter."""
        if not self.drift_ppm:
            return self.phase + n * self.period
        d = self.drift_ppm
        num = n * self.period * (d.denominator * PPM + d.numerator)
        return self.phase + _round_div(num, d.denominator * PPM)


def _round_div(num: int, den: int) -> int:
    """``round(num/den)`` with ties to even, matching ``round(Fraction)``."""
    q, r = divmod(num, den)
    twice = 2 * r
    if twice > den or (twice == den and q & 1):
        q += 1
    return q


def next_edge(domain: ClockDomain, edge_index: int, rng: Optional[random.Random] = None) -> SimTime:
    """Time of rising edge ``edge_index`` of ``domain``.

    One jitter sample is drawn from ``rng`` per call when the domain has
    jitter; call in increasing ``edge_index`` order on a dedicated substream
    for reproducible traces.
    """
    if edge_index < 0:
        raise ValueError("edge_index must be non-negative")
    domain.validate()
    t = domain.nominal_edge(edge_index)
    if domain.jitter:
        if rng is None:
            raise ValueError("a jittered clock needs an rng")
        t += rng.randint(-domain.jitter, domain.jitter)
    return t


def classify_relationship(a: ClockDomain, b: ClockDomain, threshold_ppm: float = PLESIOCHRONOUS_PPM) -> str:
    """Name the relationship between two clocks.

    Frequencies are compared through the drift-adjusted periods, so two
    clocks with slightly different nominal periods but a relative offset
    below ``threshold_ppm`` count as plesiochronous.
    """
    pa, pb = a.effective_period, b.effective_period
    if pa == pb:
        if a.period == b.period and a.phase == b.phase:
            return "synchronous"
        return "mesochronous"
    offset_ppm = abs(pa / pb - 1) * PPM
    if offset_ppm < threshold_ppm:
        return "plesiochronous"
    return "heterochronous"


class Event(NamedTuple):
    time: SimTime
    seq: int
    kind: str
    action: Optional[Callable[["Event"], None]]
    payload: object = None


@dataclass
class RunStats:
    dispatched: int = 0
    by_kind: Counter = field(default_factory=Counter)
    now: SimTime = 0


class Simulator:
    """Event queue plus dispatcher.

    ``run(until)`` dispatches events with ``time < until``; later events stay
    queued so a run can be resumed. A callback may call :meth:`stop` to end
    the current ``run`` after it returns.
    """

    def __init__(self, livelock_limit: int = 100_000):
        self._queue: list[Event] = []
        self._seq = 0
        self.now: SimTime = 0
        self.livelock_limit = livelock_limit
        self.stats = RunStats()
        self._stopped = False
        self.trace: Optional[list[tuple[SimTime, str]]] = None

    def schedule(self, time: SimTime, kind: str, action=None, payload=None) -> Event:
        if time < self.now:
            raise ValueError(f"cannot schedule {kind} at {time}, before now={self.now}")
        ev = Event(time, self._seq, kind, action, payload)
        self._seq += 1
        heapq.heappush(self._queue, ev)
        return ev

    def __len__(self):
        return len(self._queue)

    def peek_time(self) -> Optional[SimTime]:
        return self._queue[0].time if self._queue else None

    def stop(self) -> None:
        self._stopped = True

    def run(self, until: SimTime) -> RunStats:
        queue = self._queue
        stats = self.stats
        by_kind = stats.by_kind
        trace = self.trace
        limit = self.livelock_limit
        same_time = 0
        self._stopped = False
        pop = heapq.heappop
        while queue and queue[0].time < until:
            ev = pop(queue)
            if ev.time == self.now:
                same_time += 1
                if same_time > limit:
                    raise LivelockError(f"{same_time} events at t={self.now} ps without time advancing")
            else:
                same_time = 0
                self.now = ev.time
            stats.dispatched += 1
            by_kind[ev.kind] += 1
            if trace is not None:
                trace.append((ev.time, ev.kind))
            if ev.action is not None:
                ev.action(ev)
            if self._stopped:
                break
        stats.now = self.now
        return stats


class ClockDriver:
    """Schedules successive rising edges of one domain on a simulator.

    ``on_edge(index, time)`` runs at each edge. Jitter is drawn from a
    private substream so the edge train does not depend on event interleaving.
    ``origin`` translates the whole edge train in time.
    """

    kind = "edge"

    def __init__(self, sim: Simulator, domain: ClockDomain, on_edge, rng: Optional[random.Random] = None,
                 origin: SimTime = 0):
        self.sim = sim
        self.domain = domain
        self.on_edge = on_edge
        self.rng = rng
        self.origin = origin
        self.index = 0
        self.kind = f"edge{domain.id}"
        self._fire = self._dispatch
        self._schedule_next()

    def edge_time(self, n: int) -> SimTime:
        return self.origin + next_edge(self.domain, n, self.rng)

    def _schedule_next(self) -> None:
        self.sim.schedule(self.edge_time(self.index), self.kind, self._fire)

    def _dispatch(self, ev: Event) -> None:
        n = self.index
        self.index += 1
        self.on_edge(n, ev.time)
        self._schedule_next()
