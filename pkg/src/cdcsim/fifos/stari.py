"""
STARI-style elastic buffer on a mesochronous link.

A micropipeline starts half full; the transmitter puts one word on every
tx edge and the receiver takes one on every rx edge delayed by ``skew``.
Neither end has flow control, so a put that finds the input stage busy is
an overflow and a get that finds the output stage empty is an underflow.

The default engine evaluates the pipeline with the max-plus firing-time
recurrence

    F[i][k] = max(F[i-1][k] + forward, F[i+1][k-1] + backward)

where ``F[i][k]`` is when stage ``i`` latches word ``k``, ``F[-1][k]`` is
the put time and ``F[depth][k]`` the get time. It is exact for fixed stage
delays and far cheaper than dispatching every wire event. ``engine="events"``
runs the same link on :class:`SelfTimedPipeline` instead; the two agree
whenever no environment action ties with a wire event.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Optional

from ..kernel import ClockDomain, ConfigError, Simulator, next_edge
from .selftimed import SelfTimedPipeline

INF = float("inf")
NEG = float("-inf")


@dataclass
class LinkResult:
    failures: int
    delivered: int
    overflows: int = 0
    underflows: int = 0
    order_errors: int = 0


def slack_bound(depth: int, period: int) -> int:
    """Largest skew (ps) a half-full buffer of ``depth`` stages absorbs."""
    return depth // 2 * period


class _MaxPlusLink:
    def __init__(self, depth: int, forward: int, backward: int):
        self.d = depth
        self.fwd = forward
        self.bwd = backward
        init = depth // 2
        self.init = init
        self.counts = [init] * depth
        for j in range(init):
            self.counts[depth - 1 - j] = j + 1
        self.ring = ring = 4 * depth + 4
        self.memo = [[None] * ring for _ in range(depth)]
        self.put_t = [None] * ring
        self.get_t = [None] * ring
        self.version = 0
        self.next_put = init
        self.next_get = 0

    def _put_time(self, k):
        if k < self.init:
            return NEG
        e = self.put_t[k % self.ring]
        return e[1] if e is not None and e[0] == k else INF

    def _get_time(self, k):
        if k < 0:
            return NEG
        e = self.get_t[k % self.ring]
        return e[1] if e is not None and e[0] == k else INF

    def fire(self, i: int, k: int):
        if k < self.counts[i]:
            return NEG
        memo = self.memo[i]
        slot = k % self.ring
        m = memo[slot]
        if m is not None and m[0] == k and (m[1] != INF or m[2] == self.version):
            return m[1]
        left = self._put_time(k) if i == 0 else self.fire(i - 1, k)
        right = self._get_time(k - 1) if i == self.d - 1 else self.fire(i + 1, k - 1)
        v = INF if left == INF or right == INF else max(left + self.fwd, right + self.bwd)
        memo[slot] = (k, v, self.version)
        return v

    def put(self, t) -> bool:
        k = self.next_put
        if self.fire(0, k - 1) + self.bwd > t:
            return False
        self.put_t[k % self.ring] = (k, t)
        self.next_put = k + 1
        self.version += 1
        return True

    def get(self, t) -> Optional[int]:
        k = self.next_get
        if self.fire(self.d - 1, k) + self.fwd > t:
            return None
        self.get_t[k % self.ring] = (k, t)
        self.next_get = k + 1
        self.version += 1
        return k


def elastic_link_run(tx: ClockDomain, rx: ClockDomain, skew: int, depth: int, n_words: int,
                     forward: int = 50, backward: int = 50, rng: Optional[random.Random] = None,
                     engine: str = "maxplus") -> LinkResult:
    """Run ``n_words`` receiver cycles over a half-full elastic buffer.

    ``skew`` delays every get relative to its rx edge (negative values
    advance it). Failures are counted, never raised.
    """
    if depth < 2 or depth % 2:
        raise ConfigError("elastic buffer depth must be an even number >= 2")
    if tx.effective_period != rx.effective_period:
        raise ConfigError("an elastic link needs mesochronous clocks (equal effective periods)")
    if n_words < 1:
        raise ConfigError("n_words must be >= 1")
    rng = rng or random.Random(0)
    tx_rng = random.Random(f"{rng.random()}/tx")
    rx_rng = random.Random(f"{rng.random()}/rx")
    tx_base = max(0, -skew)
    rx_base = max(0, skew)

    if engine == "maxplus":
        link = _MaxPlusLink(depth, forward, backward)
        do_put = link.put
        do_get = link.get
        advance = None
    elif engine == "events":
        sim = Simulator()
        pipe = SelfTimedPipeline(sim, depth, forward, backward, init_words=depth // 2)

        def advance(t):
            sim.run(t)
            sim.now = t

        def do_put(t):
            return pipe.put(pipe.puts)

        def do_get(t):
            return pipe.get()
    else:
        raise ValueError(f"unknown engine {engine!r}")

    overflows = underflows = order_errors = delivered = 0
    expect = 0
    n_tx = n_rx = 0
    t_tx = next_edge(tx, 0, tx_rng) + tx_base
    t_rx = next_edge(rx, 0, rx_rng) + rx_base
    while n_rx < n_words:
        if t_tx <= t_rx:
            if advance is not None:
                advance(t_tx)
            if not do_put(t_tx):
                overflows += 1
            n_tx += 1
            t_tx = next_edge(tx, n_tx, tx_rng) + tx_base
        else:
            if advance is not None:
                advance(t_rx)
            word = do_get(t_rx)
            if word is None:
                underflows += 1
            else:
                delivered += 1
                if word != expect:
                    order_errors += 1
                expect = word + 1
            n_rx += 1
            t_rx = next_edge(rx, n_rx, rx_rng) + rx_base
    return LinkResult(overflows + underflows + order_errors, delivered, overflows, underflows, order_errors)
