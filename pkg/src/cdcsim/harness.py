"""
Experiment runner: producers, consumers, stress injection, scoring, metrics.

A run wires one FIFO between two clock domains on a fresh
:class:`~cdcsim.kernel.Simulator`. The producer offers sequence-numbered
words on write edges; the consumer takes them on read edges. Every delivered
word goes through a streaming :class:`Scoreboard`.
"""

from __future__ import annotations

import dataclasses
import math
import random
from collections import Counter, deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Optional, Sequence

from .elements import FlopTimings
from .fifos import (CorruptWord, FifoConfig, GrayFifo, PausibleFifo, SelfTimedFifo, UnsafeBinaryFifo,
                    elastic_link_run)
from .fifos.pausible import READ, WRITE
from .kernel import ClockDomain, ClockDriver, ConfigError, LivelockError, SeededRng, Simulator, next_edge


@dataclass(frozen=True)
class Stress:
    """``metastability`` False makes synchronizers ideal; ``rate`` is the
    fraction of cross-domain transitions forced into a sampling window."""

    metastability: bool = True
    rate: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.rate <= 1.0:
            raise ConfigError(f"stress rate must be in [0, 1], got {self.rate}")


@dataclass(frozen=True)
class ExperimentConfig:
    fifo: FifoConfig
    tx_clock: ClockDomain
    rx_clock: ClockDomain
    seed: int = 0
    n_words: int = 1000
    producer_duty: float = 1.0
    consumer_duty: float = 1.0
    stress: Stress = Stress()
    timings: FlopTimings = FlopTimings()
    aperture: int = 30
    mutex_delay: int = 10
    origin: int = 0
    strict: bool = False
    link_skew: int = 0
    watchdog_cycles: int = 10_000
    record_sequence: bool = False

    def __post_init__(self):
        if self.n_words < 1:
            raise ConfigError("n_words must be >= 1")
        for name in ("producer_duty", "consumer_duty"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ConfigError(f"{name} must be in [0, 1], got {v}")
        if not 0 <= self.seed < 2**64:
            raise ConfigError("seed must be an unsigned 64-bit integer")
        if self.tx_clock.id == self.rx_clock.id:
            raise ConfigError("tx and rx clocks need distinct ids")
        if self.watchdog_cycles < 1:
            raise ConfigError("watchdog_cycles must be >= 1")

    @property
    def slow_period(self) -> int:
        return max(self.tx_clock.period, self.rx_clock.period)


class Scoreboard:
    """Streaming comparison of delivered words against the sent order.

    The first violation fixes the verdict: ``loss(seq)``, ``duplicate(seq)``,
    ``reorder(a,b)`` or ``corrupt(slot)``. A gap is held open until the end:
    if every skipped word turns up later it was a reorder, otherwise a loss.
    Words carry ``seq mod 2**width``.
    """

    def __init__(self, word_width: int = 32, record: bool = False):
        self.mask = (1 << word_width) - 1
        self.expected = 0
        self.received = 0
        self.violations = 0
        self.first: Optional[str] = None
        self.gap: Optional[tuple[int, int]] = None  # skipped range, when a gap came first
        self.first_reorder: Optional[str] = None
        self.missing: set[int] = set()
        self.sequence: Optional[list] = [] if record else None

    def _flag(self, verdict: str) -> None:
        self.violations += 1
        if self.first is None:
            self.first = verdict

    def receive(self, word) -> None:
        self.received += 1
        if self.sequence is not None:
            self.sequence.append(word)
        if isinstance(word, CorruptWord):
            self._flag(f"corrupt({word.slot})")
            return
        exp = self.expected & self.mask
        if word == exp:
            self.expected += 1
            return
        # place the word relative to the expected sequence number, modulo the word width
        ahead = (word - exp) & self.mask
        if ahead <= self.mask // 2:
            for s in range(self.expected, self.expected + ahead):
                self.missing.add(s)
            if self.first is None:
                self.gap = (self.expected, self.expected + ahead)
            self._flag("gap")
            self.expected += ahead + 1
            return
        back = self.expected - ((exp - word) & self.mask)
        if back in self.missing:
            self.missing.discard(back)
            if self.first_reorder is None:
                self.first_reorder = f"reorder({self.expected - 1},{back})"
        else:
            self._flag(f"duplicate({back})")

    def verdict(self) -> str:
        if self.first is None:
            return "ok"
        if self.first == "gap":
            lo, hi = self.gap
            left = [s for s in range(lo, hi) if s in self.missing]
            return f"loss({left[0]})" if left else self.first_reorder
        return self.first


@dataclass
class Metrics:
    delivered: int = 0
    mean_latency_rx_cycles: Fraction = Fraction(0)
    latency_histogram: Counter = field(default_factory=Counter)
    throughput_words_per_slow_cycle: Fraction = Fraction(0)
    metastable_events: int = 0
    escapes: int = 0
    clock_pauses: int = 0
    max_pause: int = 0
    flag_violations: int = 0
    stale_violations: int = 0
    overflows: int = 0
    underflows: int = 0
    round_trip_cycles: Optional[Fraction] = None
    scoreboard_violations: int = 0
    sim_time: int = 0
    edges: int = 0


@dataclass
class RunResult:
    metrics: Metrics
    verdict: str
    sequence: Optional[list] = None


class WatchdogError(LivelockError):
    """No word delivered for too long while the producer had work to offer."""


def build_fifo(cfg: ExperimentConfig, sim: Simulator, rng: SeededRng):
    f = cfg.fifo
    stress_rng = rng.fork("stress")
    rate = cfg.stress.rate
    ideal = not cfg.stress.metastability
    if f.design in ("gray", "unsafe-binary"):
        cls = GrayFifo if f.design == "gray" else UnsafeBinaryFifo
        return cls(f.depth, f.sync_stages, cfg.timings, rng.fork("sync"), rate, stress_rng, ideal=ideal,
                   strict=cfg.strict)
    if f.design == "pausible":
        return PausibleFifo(f.depth, f.credit_pairs, cfg.timings, rng.fork("pausible"), rate, stress_rng,
                            aperture=cfg.aperture, mutex_delay=cfg.mutex_delay)
    if f.design == "selftimed":
        return SelfTimedFifo(sim, f.depth, f.stage_forward, f.stage_backward)
    raise ConfigError(f"design {f.design!r} is not driven by run_experiment's clocked path")


class PausibleClockDriver:
    """Clock driver whose edges the FIFO may pause.

    Before an edge fires the FIFO arbitrates pending toggles; a contended
    edge is re-dispatched at the paused time and re-checked. The pause is
    then carried into every later edge of the domain.
    """

    def __init__(self, sim: Simulator, domain: ClockDomain, fifo: PausibleFifo, side: str, on_edge,
                 rng: Optional[random.Random], origin: int):
        self.sim = sim
        self.domain = domain
        self.fifo = fifo
        self.side = side
        self.gen = fifo.clocks[side]
        self.on_edge = on_edge
        self.rng = rng
        self.origin = origin
        self.index = 0
        self.kind = f"edge{domain.id}"
        self.nominal = self._edge_time(0)
        sim.schedule(self.nominal, self.kind, self._dispatch)

    def _edge_time(self, n: int) -> int:
        return self.origin + next_edge(self.domain, n, self.rng) + self.gen.offset

    def _dispatch(self, ev) -> None:
        t = ev.time
        paused = self.fifo.settle_edge(self.side, t)
        if paused is not None:
            self.sim.schedule(paused, self.kind, self._dispatch)
            return
        self.fifo.record_pause(self.side, t - self.nominal)
        n = self.index
        self.index += 1
        self.on_edge(n, t)
        self.nominal = self._edge_time(self.index)
        self.sim.schedule(self.nominal, self.kind, self._dispatch)


def run_experiment(cfg: ExperimentConfig, engine: str = "auto") -> RunResult:
    """Run one experiment to completion (``n_words`` delivered).

    ``engine`` picks the pure-Python ``"reference"`` objects or the
    ``"compiled"`` twin in :mod:`cdcsim.fast`; both give identical results.
    ``"auto"`` compiles whenever the design has a compiled twin.
    """
    if cfg.fifo.design == "stari":
        return _run_stari(cfg)
    if engine not in ("auto", "reference", "compiled"):
        raise ValueError(f"unknown engine {engine!r}")
    if engine != "reference":
        from . import fast

        if fast.supports(cfg):
            return _run_compiled(cfg)
        if engine == "compiled":
            raise ConfigError(f"no compiled engine for design {cfg.fifo.design!r}")
    rng = SeededRng(cfg.seed)
    sim = Simulator()
    fifo = build_fifo(cfg, sim, rng)
    board = Scoreboard(cfg.fifo.word_width, record=cfg.record_sequence)
    word_mask = board.mask
    n_words = cfg.n_words
    rx_period = cfg.rx_clock.period
    slow = cfg.slow_period
    watchdog_ps = cfg.watchdog_cycles * slow
    p_rng = rng.fork("producer")
    c_rng = rng.fork("consumer")
    p_duty = cfg.producer_duty
    c_duty = cfg.consumer_duty
    pausible = isinstance(fifo, PausibleFifo)
    gray_like = isinstance(fifo, GrayFifo)

    commits: deque = deque()  # commit times of words not yet delivered
    rt_pending: deque = deque()  # commit times awaiting the writer's view of their pop
    st = {
        "next_seq": 0, "pending": None, "delivered": 0, "lat_sum": 0, "first": None, "last": None,
        "last_progress": 0, "rt_sum": 0, "rt_n": 0, "rview": 0, "rseen": 0,
    }
    hist: Counter = Counter()
    ptr_mask = getattr(fifo, "ptr_mask", None)
    write_cycle = fifo.write_cycle
    read_cycle = fifo.read_cycle
    receive = board.receive

    def on_write(n: int, t: int) -> None:
        pending = st["pending"]
        if pending is None and st["next_seq"] < n_words and (p_duty >= 1.0 or p_rng.random() < p_duty):
            pending = st["pending"] = st["next_seq"] & word_mask
        accepted, _ = write_cycle(pending, t)
        if accepted:
            st["pending"] = None
            st["next_seq"] += 1
            commits.append(t)
            rt_pending.append(t)
        # pointer round trip: writer learns of pops through its view of the read pointer
        if gray_like:
            view = fifo.rptr_view
            adv = (view - st["rview"]) & ptr_mask
            st["rview"] = view
        elif pausible:
            adv = fifo.rptr_est - st["rseen"]
            st["rseen"] = fifo.rptr_est
        else:
            adv = 0
        while adv and rt_pending:
            st["rt_sum"] += t - rt_pending.popleft()
            st["rt_n"] += 1
            adv -= 1

    def on_read(n: int, t: int) -> None:
        ready = c_duty >= 1.0 or c_rng.random() < c_duty
        word, _ = read_cycle(ready, t)
        if word is not None:
            receive(word)
            lat = t - commits.popleft() if commits else 0
            st["lat_sum"] += lat
            hist[(2 * lat + rx_period) // (2 * rx_period)] += 1
            d = st["delivered"] = st["delivered"] + 1
            if st["first"] is None:
                st["first"] = t
            st["last"] = t
            st["last_progress"] = t
            if d >= n_words:
                sim.stop()
        elif t - st["last_progress"] > watchdog_ps:
            if st["pending"] is not None or commits:
                raise WatchdogError(f"no delivery for {cfg.watchdog_cycles} slow cycles at t={t} ps "
                                    f"({st['delivered']} of {n_words} delivered)")
            st["last_progress"] = t

    tx_rng = rng.fork("jitter:tx") if cfg.tx_clock.jitter else None
    rx_rng = rng.fork("jitter:rx") if cfg.rx_clock.jitter else None
    # shift so an early-jittered first edge still lands at t >= 0
    origin = cfg.origin + max(cfg.tx_clock.jitter, cfg.rx_clock.jitter)
    if pausible:
        tx_drv = PausibleClockDriver(sim, cfg.tx_clock, fifo, WRITE, on_write, tx_rng, origin)
        rx_drv = PausibleClockDriver(sim, cfg.rx_clock, fifo, READ, on_read, rx_rng, origin)
    else:
        tx_drv = ClockDriver(sim, cfg.tx_clock, on_write, tx_rng, origin)
        rx_drv = ClockDriver(sim, cfg.rx_clock, on_read, rx_rng, origin)
    st["last_progress"] = origin
    stats = sim.run(1 << 62)

    m = Metrics()
    delivered = st["delivered"]
    m.delivered = delivered
    if delivered:
        m.mean_latency_rx_cycles = Fraction(st["lat_sum"], delivered * rx_period)
    m.latency_histogram = hist
    if delivered > 1 and st["last"] > st["first"]:
        m.throughput_words_per_slow_cycle = Fraction((delivered - 1) * slow, st["last"] - st["first"])
    m.metastable_events = fifo.metastable_events
    m.escapes = fifo.escapes
    if pausible:
        m.clock_pauses = fifo.pauses
        m.max_pause = fifo.max_pause
    m.flag_violations = fifo.flag_violations
    m.stale_violations = fifo.stale_violations
    m.overflows = fifo.overflows
    m.underflows = fifo.underflows
    if st["rt_n"]:
        m.round_trip_cycles = Fraction(st["rt_sum"], st["rt_n"] * cfg.tx_clock.period)
    m.sim_time = stats.now - origin
    m.edges = tx_drv.index + rx_drv.index
    m.scoreboard_violations = board.violations
    verdict = board.verdict()
    if verdict == "ok" and delivered < n_words:
        verdict = f"loss({board.expected})"
    return RunResult(m, verdict, board.sequence)


def _run_compiled(cfg: ExperimentConfig) -> RunResult:
    from . import fast
    from .elements import MetastabilityEscape, ProtocolError

    res, hist, seq = fast.run_compiled(cfg)
    r = [int(x) for x in res]
    status = r[fast.R_STATUS]
    t = r[fast.R_ERR_T]
    if status == fast.ST_WATCHDOG:
        raise WatchdogError(f"no delivery for {cfg.watchdog_cycles} slow cycles at t={t} ps "
                            f"({r[fast.R_DELIVERED]} of {cfg.n_words} delivered)")
    if status == fast.ST_ESCAPE:
        raise MetastabilityEscape(f"unresolved metastability at final stage, t={t} ps")
    if status == fast.ST_PROTOCOL:
        raise ProtocolError(f"two-phase channel driven out of turn at t={t} ps")
    m = Metrics()
    delivered = m.delivered = r[fast.R_DELIVERED]
    if delivered:
        m.mean_latency_rx_cycles = Fraction(r[fast.R_LAT_SUM], delivered * cfg.rx_clock.period)
    m.latency_histogram = Counter(hist)
    first, last = r[fast.R_FIRST], r[fast.R_LAST]
    if delivered > 1 and last > first:
        m.throughput_words_per_slow_cycle = Fraction((delivered - 1) * cfg.slow_period, last - first)
    m.metastable_events = r[fast.R_MEV]
    m.escapes = r[fast.R_ESC]
    m.clock_pauses = r[fast.R_PAUSES]
    m.max_pause = r[fast.R_MAX_PAUSE]
    m.flag_violations = r[fast.R_FLAG]
    m.stale_violations = r[fast.R_STALE]
    m.overflows = r[fast.R_OVER]
    m.underflows = r[fast.R_UNDER]
    if r[fast.R_RT_N]:
        m.round_trip_cycles = Fraction(r[fast.R_RT_SUM], r[fast.R_RT_N] * cfg.tx_clock.period)
    origin = cfg.origin + max(cfg.tx_clock.jitter, cfg.rx_clock.jitter)
    m.sim_time = r[fast.R_NOW] - origin
    m.edges = r[fast.R_TX_EDGES] + r[fast.R_RX_EDGES]
    m.scoreboard_violations = r[fast.R_VIOLATIONS]
    kind, a, b = r[fast.R_KIND], r[fast.R_A], r[fast.R_B]
    verdict = {
        fast.V_NONE: "ok",
        fast.V_CORRUPT: f"corrupt({a})",
        fast.V_LOSS: f"loss({a})",
        fast.V_REORDER: f"reorder({a},{b})",
        fast.V_DUPLICATE: f"duplicate({a})",
    }[kind]
    if verdict == "ok" and delivered < cfg.n_words:
        verdict = f"loss({r[fast.R_EXPECTED]})"
    if seq is not None:
        seq = [CorruptWord(-1 - w) if w < 0 else w for w in seq]
    return RunResult(m, verdict, seq)


def _run_stari(cfg: ExperimentConfig) -> RunResult:
    f = cfg.fifo
    res = elastic_link_run(cfg.tx_clock, cfg.rx_clock, cfg.link_skew, f.depth, cfg.n_words,
                           f.stage_forward, f.stage_backward, rng=SeededRng(cfg.seed).fork("link"))
    m = Metrics(delivered=res.delivered, overflows=res.overflows, underflows=res.underflows)
    if res.failures == 0:
        verdict = "ok"
    elif res.overflows:
        verdict = "loss(overflow)"
    else:
        verdict = "loss(underflow)"
    return RunResult(m, verdict)


def inject_violation(cfg: ExperimentConfig, rate: float) -> ExperimentConfig:
    """Same run with ``rate`` of the cross-domain transitions forced into sampling windows."""
    return dataclasses.replace(cfg, stress=Stress(metastability=cfg.stress.metastability, rate=rate))


@dataclass
class LatencyRow:
    design: str
    sync_stages: int
    mean_latency_rx_cycles: Fraction
    round_trip_cycles: Optional[Fraction]
    verdict: str


def latency_compare(cfgs: Sequence[ExperimentConfig], check: bool = True) -> list[LatencyRow]:
    """Mean crossing latency per design under matched clocks, seed and load.

    With ``check``, raises AssertionError when a pausible run is not strictly
    faster than every brute-force run in the set.
    """
    base = cfgs[0]
    for c in cfgs[1:]:
        if dataclasses.replace(c, fifo=base.fifo) != base:
            raise ConfigError("latency_compare needs configs that differ only in the FIFO")
    rows = []
    for c in cfgs:
        r = run_experiment(c)
        rows.append(LatencyRow(c.fifo.design, c.fifo.sync_stages, r.metrics.mean_latency_rx_cycles,
                               r.metrics.round_trip_cycles, r.verdict))
    paus = [r.mean_latency_rx_cycles for r in rows if r.design == "pausible"]
    brute = [r.mean_latency_rx_cycles for r in rows if r.design in ("gray", "unsafe-binary")]
    if check and paus and brute and not max(paus) < min(brute):
        raise AssertionError(f"pausible latency {max(paus)} not below brute-force {min(brute)}")
    return rows


@dataclass
class SweepRow:
    ratio: Fraction
    credit_pairs: int
    tx_period: int
    rx_period: int
    throughput: Fraction
    verdict: str


def clocks_for_ratio(ratio, slow_period: int = 1000, tx_phase: int = 0, rx_phase: int = 0):
    """Periods for a tx:rx frequency ratio with the slower domain at ``slow_period``."""
    r = Fraction(ratio)
    if r <= 0:
        raise ConfigError("ratios must be positive")
    if r >= 1:
        tx_p, rx_p = round(slow_period / r), slow_period
    else:
        tx_p, rx_p = slow_period, round(slow_period * r)
    return (ClockDomain(0, tx_p, tx_phase % tx_p), ClockDomain(1, rx_p, rx_phase % rx_p))


def throughput_sweep(base: ExperimentConfig, ratios: Iterable, assert_full: bool = True) -> list[SweepRow]:
    """Words delivered per slower-domain cycle at each tx:rx frequency ratio.

    With ``assert_full`` a pausible design with two or more credit pairs must
    reach 0.99 at every ratio between 1:1 and 2:1; other designs are reported
    only.
    """
    rows = []
    for ratio in ratios:
        tx, rx = clocks_for_ratio(ratio, base.slow_period, base.tx_clock.phase, base.rx_clock.phase)
        tx = dataclasses.replace(tx, jitter=min(base.tx_clock.jitter, (tx.period - 1) // 4),
                                 drift_ppm=base.tx_clock.drift_ppm)
        rx = dataclasses.replace(rx, jitter=min(base.rx_clock.jitter, (rx.period - 1) // 4),
                                 drift_ppm=base.rx_clock.drift_ppm)
        r = run_experiment(dataclasses.replace(base, tx_clock=tx, rx_clock=rx))
        rows.append(SweepRow(Fraction(ratio), base.fifo.credit_pairs, tx.period, rx.period,
                             r.metrics.throughput_words_per_slow_cycle, r.verdict))
    if assert_full and base.fifo.design == "pausible" and base.fifo.credit_pairs >= 2:
        for row in rows:
            if 1 <= row.ratio <= 2 and row.throughput < Fraction(99, 100):
                raise AssertionError(f"throughput {float(row.throughput):.4f} < 0.99 at ratio {row.ratio}")
    return rows


def random_config(rng: random.Random, design: str, n_words: int, seed: int, stress_rate: float = 1.0,
                  depth: int = 8) -> ExperimentConfig:
    """One randomized configuration: tx:rx ratio log-uniform in [1:3, 3:1], random phases,
    drift within +-500 ppm and jitter up to period/8."""
    ratio = math.exp(rng.uniform(math.log(1 / 3), math.log(3)))
    if ratio >= 1:
        tx_p, rx_p = round(1000 / ratio), 1000
    else:
        tx_p, rx_p = 1000, round(1000 * ratio)

    def clock(cid, period):
        return ClockDomain(cid, period, rng.randrange(period), rng.randint(0, period // 8),
                           Fraction(rng.randint(-500_000, 500_000), 1000))

    return ExperimentConfig(
        fifo=FifoConfig(design=design, depth=depth),
        tx_clock=clock(0, tx_p),
        rx_clock=clock(1, rx_p),
        seed=seed,
        n_words=n_words,
        producer_duty=rng.choice((1.0, round(rng.uniform(0.5, 1.0), 3))),
        consumer_duty=rng.choice((1.0, round(rng.uniform(0.5, 1.0), 3))),
        stress=Stress(metastability=True, rate=stress_rate),
    )
