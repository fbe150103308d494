import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from cdcsim.elements import FlopTimings, SyncBus
from cdcsim.fifos import (FifoConfig, GrayFifo, PausibleFifo, SelfTimedFifo, SelfTimedPipeline,
                          elastic_link_run, selftimed_fifo_step, slack_bound)
from cdcsim.fifos.pausible import READ, WRITE
from cdcsim.kernel import ClockDomain, ConfigError, Simulator


@pytest.mark.parametrize("kwargs", [
    dict(design="nope"), dict(design="gray", depth=6), dict(design="gray", depth=1),
    dict(design="gray", sync_stages=1), dict(design="pausible", credit_pairs=0), dict(design="gray", word_width=0),
])
def test_fifo_config_validation(kwargs):
    with pytest.raises(ConfigError):
        FifoConfig(**kwargs)


def _torn_values(encode, old, new, seeds=400):
    seen = set()
    for s in range(seeds):
        bus = SyncBus(4, 2, FlopTimings(), random.Random(s), init=encode(old))
        bus.drive(encode(new), 1000, forced=True)
        bus.clock(1000)
        bus.clock(2000)
        seen.add(bus.clock(3000))
    return seen


def test_torn_capture_binary_vs_gray():
    gray = lambda x: x ^ (x >> 1)
    decode = {gray(x): x for x in range(16)}
    # 0111 -> 1000 flips every bit: a binary pointer can be captured as anything
    assert _torn_values(lambda x: x, 7, 8) == set(range(16))
    # the Gray copy flips one bit, so only the old or new value is possible
    assert {decode[v] for v in _torn_values(gray, 7, 8)} == {7, 8}


def _drive_gray(fifo, pattern, rng, n=4000):
    """Alternate write/read cycles in a random order; return delivered words."""
    sent = got = 0
    out = []
    t = 0
    for _ in range(n):
        t += rng.randint(100, 900)
        if rng.random() < pattern:
            ok, _ = fifo.write_cycle(sent, t)
            sent += ok
        else:
            word, _ = fifo.read_cycle(True, t)
            if word is not None:
                out.append(word)
    return sent, out


@given(seed=st.integers(0, 2**32), pattern=st.floats(0.2, 0.8), stages=st.integers(2, 3),
       stress=st.sampled_from([0.0, 0.5, 1.0]))
@settings(max_examples=40, deadline=None)
def test_gray_fifo_invariants(seed, pattern, stages, stress):
    rng = random.Random(seed)
    fifo = GrayFifo(8, stages, rng=random.Random(seed + 1), stress_rate=stress, stress_rng=random.Random(seed + 2))
    sent, out = _drive_gray(fifo, pattern, rng)
    assert out == list(range(len(out)))
    assert len(out) <= sent
    assert fifo.flag_violations == fifo.stale_violations == 0
    assert fifo.overflows == fifo.underflows == 0


def _drive_pausible(fifo, rng, n=3000):
    sent = 0
    out = []
    tw, tr = rng.randrange(1000), rng.randrange(1000)
    pw, pr = rng.randint(400, 1500), rng.randint(400, 1500)
    for _ in range(n):
        side = WRITE if tw + fifo.clocks[WRITE].offset <= tr + fifo.clocks[READ].offset else READ
        nominal = (tw if side == WRITE else tr) + fifo.clocks[side].offset
        edge = nominal
        while True:
            paused = fifo.settle_edge(side, edge)
            if paused is None:
                break
            fifo.record_pause(side, paused - edge)
            edge = paused
        if side == WRITE:
            ok, _ = fifo.write_cycle(sent, edge)
            sent += ok
            tw += pw
        else:
            word, _ = fifo.read_cycle(True, edge)
            if word is not None:
                out.append(word)
            tr += pr
    return sent, out


@given(seed=st.integers(0, 2**32), pairs=st.integers(1, 3), stress=st.sampled_from([0.0, 1.0]))
@settings(max_examples=40, deadline=None)
def test_pausible_fifo_invariants(seed, pairs, stress):
    rng = random.Random(seed)
    fifo = PausibleFifo(8, pairs, rng=random.Random(seed + 1), stress_rate=stress,
                        stress_rng=random.Random(seed + 2))
    sent, out = _drive_pausible(fifo, rng)
    assert out == list(range(len(out)))
    assert len(out) > 100
    assert fifo.metastable_events == 0
    assert fifo.flag_violations == fifo.stale_violations == 0
    assert fifo.overflows == fifo.underflows == 0
    if stress:
        assert fifo.pauses > 0


def test_selftimed_pipeline_ripples_and_holds_order():
    sim = Simulator()
    pipe = SelfTimedPipeline(sim, depth=4, forward=50, backward=50)
    for w in range(4):
        assert selftimed_fifo_step(pipe, "put", w)
        sim.run(until=sim.now + 1000)
    assert pipe.occupancy == 4
    # the sender may hold one more word pending on the input handshake, but no further
    assert selftimed_fifo_step(pipe, "put", 4)
    sim.run(until=sim.now + 1000)
    assert not pipe.can_put()
    got = []
    while pipe.can_get():
        got.append(selftimed_fifo_step(pipe, "get"))
        sim.run(until=sim.now + 1000)
    assert got == [0, 1, 2, 3, 4]


def test_selftimed_first_word_latency_is_one_forward_hop_per_wire():
    sim = Simulator()
    pipe = SelfTimedPipeline(sim, depth=6, forward=40, backward=70)
    pipe.put("x")
    t = 0
    while not pipe.can_get():
        t += 1
        sim.run(until=t)
    # input wire into stage 0, five stage-to-stage wires, last stage to the output
    assert t - 1 == (6 + 1) * 40


def test_selftimed_fifo_wrapper_order():
    sim = Simulator()
    fifo = SelfTimedFifo(sim, 4)
    out = []
    sent = 0
    for k in range(200):
        t = 1000 * (k + 1)
        sim.run(until=t)
        ok, _ = fifo.write_cycle(sent, t)
        sent += ok
        word, _ = fifo.read_cycle(k % 3 != 0, t)
        if word is not None:
            out.append(word)
    assert out == list(range(len(out))) and len(out) > 100


def test_slack_bound():
    assert slack_bound(8, 1000) == 4000


@given(depth=st.sampled_from([4, 6, 8]), frac=st.floats(-0.7, 0.7), period=st.integers(400, 2000))
@settings(max_examples=25, deadline=None)
def test_stari_engines_agree(depth, frac, period):
    tx, rx = ClockDomain(0, period), ClockDomain(1, period)
    skew = int(frac * slack_bound(depth, period))
    a = elastic_link_run(tx, rx, skew, depth, 300, engine="maxplus")
    b = elastic_link_run(tx, rx, skew, depth, 300, engine="events")
    assert a == b


def test_stari_within_and_beyond_bound():
    tx, rx = ClockDomain(0, 1000), ClockDomain(1, 1000)
    b = slack_bound(8, 1000)
    for skew in (0, b * 3 // 4, -(b * 3 // 4)):
        r = elastic_link_run(tx, rx, skew, 8, 5000)
        assert r.failures == 0 and r.delivered == 5000 and r.order_errors == 0
    for skew in (b * 3 // 2, -(b * 3 // 2)):
        assert elastic_link_run(tx, rx, skew, 8, 5000).failures >= 1


def test_stari_rejects_unequal_periods():
    with pytest.raises(ConfigError):
        elastic_link_run(ClockDomain(0, 1000), ClockDomain(1, 999), 0, 8, 10)
