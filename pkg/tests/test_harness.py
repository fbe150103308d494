import dataclasses
import random
from fractions import Fraction

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from cdcsim.elements import FlopTimings, MetastabilityEscape
from cdcsim.fifos import CorruptWord, FifoConfig
from cdcsim.harness import (ExperimentConfig, Scoreboard, Stress, WatchdogError, clocks_for_ratio,
                            inject_violation, latency_compare, random_config, run_experiment, throughput_sweep)
from cdcsim.kernel import ClockDomain, ConfigError


def cfg(design="gray", tx=1000, rx=713, **kw):
    fifo = kw.pop("fifo", None) or FifoConfig(design)
    return ExperimentConfig(fifo, ClockDomain(0, tx), ClockDomain(1, rx), **kw)


def feed(words, width=32):
    b = Scoreboard(width)
    for w in words:
        b.receive(w)
    return b.verdict()


@pytest.mark.parametrize("words,verdict", [
    ([0, 1, 2, 3], "ok"),
    ([0, 2, 3], "loss(1)"),
    ([0, 1, 1, 2], "duplicate(1)"),
    ([0, 2, 1, 3], "reorder(2,1)"),
    ([0, CorruptWord(5), 2], "corrupt(5)"),
])
def test_scoreboard_verdicts(words, verdict):
    assert feed(words) == verdict


def test_scoreboard_wraps_with_word_width():
    assert feed([x & 0xF for x in range(100)], width=4) == "ok"
    assert feed([0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15, 0, 2], width=4) == "loss(17)"


@pytest.mark.parametrize("design", ["gray", "pausible", "unsafe-binary", "selftimed"])
def test_clean_run_delivers_in_order(design):
    r = run_experiment(cfg(design, n_words=2000, record_sequence=True), engine="reference")
    assert r.verdict == "ok"
    assert r.sequence == list(range(2000))
    assert r.metrics.delivered == 2000


def test_stari_through_run_experiment():
    c = ExperimentConfig(FifoConfig("stari"), ClockDomain(0, 1000), ClockDomain(1, 1000), n_words=2000,
                         link_skew=6000)
    assert run_experiment(c).verdict.startswith("loss(")
    assert run_experiment(dataclasses.replace(c, link_skew=1000)).verdict == "ok"


@pytest.mark.parametrize("design", ["gray", "pausible", "unsafe-binary"])
@pytest.mark.parametrize("seed", range(4))
def test_compiled_matches_reference(design, seed):
    c = random_config(random.Random(seed), design, 3000, seed, stress_rate=[0.0, 0.3, 1.0, 1.0][seed])
    c = dataclasses.replace(c, record_sequence=True)
    a = run_experiment(c, engine="reference")
    b = run_experiment(c, engine="compiled")
    assert a == b


@given(seed=st.integers(0, 2**64 - 1), design=st.sampled_from(["gray", "pausible", "unsafe-binary"]),
       stages=st.integers(2, 3), pairs=st.integers(1, 3), depth=st.sampled_from([4, 8, 16]))
@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
def test_compiled_matches_reference_property(seed, design, stages, pairs, depth):
    c = random_config(random.Random(seed), design, 600, seed, depth=depth)
    c = dataclasses.replace(c, fifo=dataclasses.replace(c.fifo, sync_stages=stages, credit_pairs=pairs),
                            record_sequence=True)
    assert run_experiment(c, engine="reference") == run_experiment(c, engine="compiled")


def test_same_seed_same_result_and_seed_matters():
    c = random_config(random.Random(9), "gray", 3000, 9)
    assert run_experiment(c) == run_experiment(c)
    other = run_experiment(dataclasses.replace(c, seed=10))
    assert other.metrics != run_experiment(c).metrics


@pytest.mark.parametrize("design", ["gray", "pausible"])
def test_phase_translation_changes_nothing(design):
    c = dataclasses.replace(random_config(random.Random(4), design, 3000, 4), record_sequence=True)
    a = run_experiment(c, engine="reference")
    b = run_experiment(dataclasses.replace(c, origin=12345), engine="reference")
    assert a.verdict == b.verdict and a.sequence == b.sequence
    assert a.metrics == b.metrics


def test_stress_raises_metastability_but_not_errors():
    base = cfg("gray", n_words=3000)
    calm = run_experiment(base)
    hot = run_experiment(inject_violation(base, 1.0))
    assert hot.metrics.metastable_events > calm.metrics.metastable_events
    assert hot.verdict == "ok" and hot.metrics.flag_violations == 0


def test_ideal_synchronizers_never_go_metastable():
    r = run_experiment(cfg("gray", n_words=2000, stress=Stress(metastability=False, rate=1.0)))
    assert r.metrics.metastable_events == 0 and r.verdict == "ok"


def test_gray_latency_grows_one_cycle_per_stage():
    two = run_experiment(cfg("gray", tx=1000, rx=1000, n_words=3000, producer_duty=0.25,
                             fifo=FifoConfig("gray", sync_stages=2)))
    three = run_experiment(cfg("gray", tx=1000, rx=1000, n_words=3000, producer_duty=0.25,
                               fifo=FifoConfig("gray", sync_stages=3)))
    assert three.metrics.mean_latency_rx_cycles - two.metrics.mean_latency_rx_cycles == 1


def test_latency_histogram_counts_every_word():
    r = run_experiment(cfg("pausible", n_words=2500))
    assert sum(r.metrics.latency_histogram.values()) == 2500


def test_strict_mode_raises_on_escape():
    slow = FlopTimings(tau=400.0)
    c = cfg("gray", tx=300, rx=317, n_words=20000, strict=True, timings=slow, stress=Stress(True, 1.0))
    with pytest.raises(MetastabilityEscape):
        run_experiment(c, engine="reference")
    with pytest.raises(MetastabilityEscape):
        run_experiment(c, engine="compiled")


def test_watchdog_fires_when_consumer_never_reads():
    c = cfg("gray", n_words=100, consumer_duty=0.0, watchdog_cycles=50)
    for engine in ("reference", "compiled"):
        with pytest.raises(WatchdogError):
            run_experiment(c, engine=engine)


def test_latency_compare_requires_matched_configs():
    a = cfg("pausible", n_words=500)
    b = dataclasses.replace(cfg("gray", n_words=500), seed=3)
    with pytest.raises(ConfigError):
        latency_compare([a, b])


def test_latency_compare_orders_designs():
    a = cfg("pausible", tx=1000, rx=1000, n_words=3000, producer_duty=0.25)
    rows = latency_compare([a, dataclasses.replace(a, fifo=FifoConfig("gray"))])
    assert rows[0].mean_latency_rx_cycles < rows[1].mean_latency_rx_cycles


def test_clocks_for_ratio():
    tx, rx = clocks_for_ratio(Fraction(2))
    assert (tx.period, rx.period) == (500, 1000)
    tx, rx = clocks_for_ratio(Fraction(1, 2))
    assert (tx.period, rx.period) == (1000, 500)
    with pytest.raises(ConfigError):
        clocks_for_ratio(0)


def test_throughput_sweep_full_rate_for_two_pairs():
    base = cfg("pausible", n_words=3000)
    rows = throughput_sweep(base, [1, Fraction(3, 2), 2])
    assert all(r.throughput >= Fraction(99, 100) for r in rows)


def test_throughput_is_bounded_by_slower_clock():
    rows = throughput_sweep(cfg("gray", n_words=3000), [Fraction(1, 3), 1, 3], assert_full=False)
    for r in rows:
        # first/last delivery land on rx edges, so the span is quantized to one rx period
        span_words = 3000 - 1
        assert 0 < r.throughput <= Fraction(span_words, span_words - 1)


def test_random_config_ranges():
    rng = random.Random(0)
    for _ in range(200):
        c = random_config(rng, "gray", 10, 0)
        fast, slow = sorted((c.tx_clock.period, c.rx_clock.period))
        assert slow == 1000 and fast >= 333
        for clk in (c.tx_clock, c.rx_clock):
            assert clk.jitter <= clk.period // 8
            assert abs(clk.drift_ppm) <= 500


@pytest.mark.parametrize("kwargs", [dict(n_words=0), dict(producer_duty=1.5), dict(seed=-1),
                                    dict(seed=2**64), dict(watchdog_cycles=0)])
def test_experiment_config_validation(kwargs):
    with pytest.raises(ConfigError):
        cfg(**kwargs)
    with pytest.raises(ConfigError):
        Stress(rate=2.0)
