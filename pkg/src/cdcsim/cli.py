"""
Command-line front end.

    cdcsim --scenario integrity --config run.ini --out result.csv

Precedence for every setting: command-line flag, then (for the seed only)
the ``CDCSIM_SEED`` environment variable, then the config file, then the
built-in default. CSV goes to ``--out`` (or stdout); the one-line-per-row
summary goes to stderr when the CSV is on stdout, else to stdout.

Exit status: 0 all scenario assertions hold, 1 an assertion failed,
2 usage, config or I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import dataclasses
import io
import os
import sys
from fractions import Fraction
from typing import Optional

from .elements import FlopTimings
from .fifos import DESIGNS, FifoConfig, elastic_link_run, slack_bound
from .graycode import exhaustive_check
from .harness import (ExperimentConfig, Stress, clocks_for_ratio, latency_compare, run_experiment,
                      throughput_sweep)
from .kernel import ClockDomain, ConfigError, LivelockError

SCENARIOS = ("integrity", "latency-compare", "throughput-sweep", "stari-skew", "negative-control",
             "gray-exhaustive")

COLUMNS = {
    "integrity": ["design", "tx_period_ps", "rx_period_ps", "seed", "words", "delivered", "verdict",
                  "mean_latency_rx_cycles", "metastable_events", "clock_pauses", "max_pause_ps"],
    "latency-compare": ["design", "sync_stages", "tx_period_ps", "rx_period_ps", "seed", "words",
                        "mean_latency_rx_cycles", "round_trip_cycles", "verdict"],
    "throughput-sweep": ["design", "credit_pairs", "ratio", "tx_period_ps", "rx_period_ps", "seed", "words",
                         "throughput_words_per_slow_cycle", "verdict"],
    "stari-skew": ["depth", "period_ps", "skew_ps", "slack_bound_ps", "words", "delivered", "failures",
                   "overflows", "underflows", "expect_failures"],
    "negative-control": ["design", "tx_period_ps", "rx_period_ps", "seed", "words", "delivered", "verdict",
                         "scoreboard_violations", "overflows", "underflows", "stale_violations",
                         "flag_violations"],
    "gray-exhaustive": ["width", "codes", "bijective", "single_bit_steps", "full_empty_agree",
                        "pairs_checked"],
}

SWEEP_RATIOS = (Fraction(1), Fraction(5, 4), Fraction(3, 2), Fraction(7, 4), Fraction(2))

# section -> key -> (type, default)
SCHEMA = {
    "fifo": {
        "design": (str, "gray"),
        "depth": (int, 8),
        "word_width": (int, 32),
        "sync_stages": (int, 2),
        "credit_pairs": (int, 2),
        "stage_forward": (int, 50),
        "stage_backward": (int, 50),
    },
    "tx_clock": {"period": (int, 1000), "phase": (int, 0), "jitter": (int, 0), "drift_ppm": (Fraction, 0)},
    "rx_clock": {"period": (int, 713), "phase": (int, 0), "jitter": (int, 0), "drift_ppm": (Fraction, 0)},
    "run": {
        "seed": (int, 0),
        "words": (int, 10_000),
        "producer_duty": (float, 1.0),
        "consumer_duty": (float, 1.0),
        "stress_rate": (float, 0.0),
        "metastability": (bool, True),
        "link_skew": (int, 0),
        "watchdog_cycles": (int, 10_000),
    },
    "timing": {
        "setup": (int, 20),
        "hold": (int, 10),
        "clk_to_q": (int, 30),
        "tau": (float, 15.0),
        "t0": (float, 30.0),
        "aperture": (int, 30),
        "mutex_delay": (int, 10),
    },
}


class UsageError(Exception):
    """Bad flags or config; exit status 2."""


def _defaults_help() -> str:
    lines = ["config file sections and defaults:"]
    for section, keys in SCHEMA.items():
        lines.append(f"  [{section}]")
        for key, (_, default) in keys.items():
            shown = "on" if default is True else default
            lines.append(f"    {key} = {shown}")
    lines.append("")
    lines.append("CSV columns per scenario:")
    for name, cols in COLUMNS.items():
        lines.append(f"  {name}: {', '.join(cols)}")
    lines.append("")
    lines.append("precedence: flag > CDCSIM_SEED (seed only) > config file > default")
    lines.append("exit status: 0 pass, 1 assertion failure, 2 usage/config/IO error")
    return "\n".join(lines)


def _line_of(text: str, section: str, key: Optional[str] = None) -> Optional[int]:
    current = None
    for n, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if line.startswith("[") and line.endswith("]"):
            current = line[1:-1].strip()
            if key is None and current == section:
                return n
            continue
        if current == section and key is not None:
            name = line.split("=", 1)[0].split(":", 1)[0].strip().lower()
            if name == key:
                return n
    return None


def _where(path: str, line: Optional[int]) -> str:
    return f"{path}:{line}" if line else path


def _convert(kind, raw: str):
    if kind is bool:
        low = raw.strip().lower()
        if low in ("1", "on", "true", "yes"):
            return True
        if low in ("0", "off", "false", "no"):
            return False
        raise ValueError(f"expected on/off, got {raw!r}")
    if kind is Fraction:
        return Fraction(raw.strip())
    return kind(raw.strip())


def read_config_file(path: str) -> dict:
    """Parse and type-check a config file; returns ``{section: {key: value}}``."""
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as e:
        raise UsageError(f"{path}: cannot read config: {e.strerror or e}") from e
    parser = configparser.ConfigParser(interpolation=None, default_section="__none__")
    try:
        parser.read_string(text, source=path)
    except configparser.DuplicateSectionError as e:
        raise UsageError(f"{_where(path, e.lineno)}: duplicate section [{e.section}]") from e
    except configparser.DuplicateOptionError as e:
        raise UsageError(f"{_where(path, e.lineno)}: duplicate key {e.option!r} in [{e.section}]") from e
    except configparser.MissingSectionHeaderError as e:
        raise UsageError(f"{_where(path, e.lineno)}: key outside any [section]") from e
    except configparser.ParsingError as e:
        lineno = e.errors[0][0] if e.errors else None
        raise UsageError(f"{_where(path, lineno)}: malformed line") from e
    values: dict = {}
    for section in parser.sections():
        if section not in SCHEMA:
            raise UsageError(f"{_where(path, _line_of(text, section))}: unknown section [{section}]")
        values[section] = {}
        for key, raw in parser.items(section):
            if key not in SCHEMA[section]:
                raise UsageError(f"{_where(path, _line_of(text, section, key))}: unknown key {key!r} "
                                 f"in [{section}]")
            kind, _ = SCHEMA[section][key]
            try:
                values[section][key] = _convert(kind, raw)
            except (ValueError, ZeroDivisionError) as e:
                raise UsageError(f"{_where(path, _line_of(text, section, key))}: bad value for {key}: {e}") from e
    values["__text__"] = text
    return values


def parse_ratio(text: str) -> Fraction:
    try:
        tx, rx = text.split(":")
        r = Fraction(tx.strip()) / Fraction(rx.strip())
    except (ValueError, ZeroDivisionError) as e:
        raise UsageError(f"--ratio expects TX:RX with positive numbers, got {text!r}") from e
    if r <= 0:
        raise UsageError(f"--ratio must be positive, got {text!r}")
    return r


def parse_config(path: Optional[str] = None, seed: Optional[int] = None, words: Optional[int] = None,
                 ratio: Optional[Fraction] = None, design: Optional[str] = None,
                 env: Optional[dict] = None) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig` from a file and flag overrides."""
    env = os.environ if env is None else env
    file_values = read_config_file(path) if path else {}
    text = file_values.pop("__text__", "")
    merged = {s: {k: d for k, (_, d) in keys.items()} for s, keys in SCHEMA.items()}
    for section, kv in file_values.items():
        merged[section].update(kv)
    if seed is None and env.get("CDCSIM_SEED", "").strip():
        try:
            seed = int(env["CDCSIM_SEED"])
        except ValueError as e:
            raise UsageError(f"CDCSIM_SEED must be an integer, got {env['CDCSIM_SEED']!r}") from e
    if seed is not None:
        merged["run"]["seed"] = seed
    if words is not None:
        merged["run"]["words"] = words
    if design is not None:
        merged["fifo"]["design"] = design

    def located(section, key, err):
        if path and section in file_values and key in file_values[section]:
            return UsageError(f"{_where(path, _line_of(text, section, key))}: {err}")
        return UsageError(str(err))

    def build(section, factory, field_of):
        try:
            return factory()
        except ConfigError as e:
            msg = str(e)
            # blame the key named first in the message
            hits = [(msg.find(field_of.get(key, key)), key) for key in SCHEMA[section]]
            hits = sorted(h for h in hits if h[0] >= 0)
            raise located(section, hits[0][1] if hits else "", msg) from e

    f = merged["fifo"]
    fifo = build("fifo", lambda: FifoConfig(**f), {})
    clocks = []
    for cid, section in enumerate(("tx_clock", "rx_clock")):
        c = merged[section]
        clocks.append(build(section, lambda c=c, cid=cid: ClockDomain(cid, c["period"], c["phase"], c["jitter"],
                                                                       c["drift_ppm"]), {}))
    tx, rx = clocks
    if ratio is not None:
        slow = max(tx.period, rx.period)
        ntx, nrx = clocks_for_ratio(ratio, slow, tx.phase, rx.phase)
        tx = dataclasses.replace(tx, period=ntx.period, phase=ntx.phase, jitter=min(tx.jitter, (ntx.period - 1) // 4))
        rx = dataclasses.replace(rx, period=nrx.period, phase=nrx.phase, jitter=min(rx.jitter, (nrx.period - 1) // 4))
    t = merged["timing"]
    timings = build("timing", lambda: FlopTimings(t["setup"], t["hold"], t["clk_to_q"], t["tau"], t["t0"]), {})
    r = merged["run"]
    stress = build("run", lambda: Stress(r["metastability"], r["stress_rate"]), {"stress_rate": "stress rate"})
    return build("run", lambda: ExperimentConfig(
        fifo=fifo, tx_clock=tx, rx_clock=rx, seed=r["seed"], n_words=r["words"],
        producer_duty=r["producer_duty"], consumer_duty=r["consumer_duty"], stress=stress, timings=timings,
        aperture=t["aperture"], mutex_delay=t["mutex_delay"], link_skew=r["link_skew"],
        watchdog_cycles=r["watchdog_cycles"]), {"words": "n_words"})


# -- scenarios ---------------------------------------------------------------

def _num(x) -> str:
    if x is None:
        return ""
    if isinstance(x, Fraction):
        return f"{float(x):.6f}"
    return str(x)


class Outcome:
    def __init__(self, scenario: str):
        self.columns = COLUMNS[scenario]
        self.rows: list[list[str]] = []
        self.summary: list[str] = []
        self.failures: list[str] = []

    def row(self, **values) -> None:
        self.rows.append([_num(values[c]) for c in self.columns])

    def check(self, ok: bool, message: str) -> None:
        self.summary.append(f"{'PASS' if ok else 'FAIL'}  {message}")
        if not ok:
            self.failures.append(message)


def _integrity(cfg: ExperimentConfig, out: Outcome) -> None:
    r = run_experiment(cfg)
    m = r.metrics
    out.row(design=cfg.fifo.design, tx_period_ps=cfg.tx_clock.period, rx_period_ps=cfg.rx_clock.period,
            seed=cfg.seed, words=cfg.n_words, delivered=m.delivered, verdict=r.verdict,
            mean_latency_rx_cycles=m.mean_latency_rx_cycles, metastable_events=m.metastable_events,
            clock_pauses=m.clock_pauses, max_pause_ps=m.max_pause)
    out.check(r.verdict == "ok", f"{cfg.fifo.design}: verdict {r.verdict}, {m.delivered} delivered")
    out.check(m.flag_violations == 0, f"{cfg.fifo.design}: {m.flag_violations} optimistic flag decisions")
    out.check(m.stale_violations == 0, f"{cfg.fifo.design}: {m.stale_violations} remote-pointer views ahead of truth")
    if cfg.fifo.design == "pausible":
        out.check(m.metastable_events == 0, f"pausible: {m.metastable_events} metastable samples")


def _latency(cfg: ExperimentConfig, out: Outcome) -> None:
    cfgs = [dataclasses.replace(cfg, fifo=FifoConfig("pausible", cfg.fifo.depth, cfg.fifo.word_width,
                                                     credit_pairs=cfg.fifo.credit_pairs))]
    for stages in sorted({2, cfg.fifo.sync_stages, 3}):
        cfgs.append(dataclasses.replace(cfg, fifo=FifoConfig("gray", cfg.fifo.depth, cfg.fifo.word_width,
                                                             sync_stages=stages)))
    rows = latency_compare(cfgs, check=False)
    brute = [r.mean_latency_rx_cycles for r in rows if r.design != "pausible"]
    faster = rows[0].mean_latency_rx_cycles < min(brute)
    for row in rows:
        out.row(design=row.design, sync_stages=row.sync_stages if row.design != "pausible" else "",
                tx_period_ps=cfg.tx_clock.period, rx_period_ps=cfg.rx_clock.period, seed=cfg.seed,
                words=cfg.n_words, mean_latency_rx_cycles=row.mean_latency_rx_cycles,
                round_trip_cycles=row.round_trip_cycles, verdict=row.verdict)
    paus = rows[0].mean_latency_rx_cycles
    gray2 = next(r for r in rows if r.design == "gray" and r.sync_stages == 2)
    out.check(faster, f"pausible {float(paus):.3f} rx cycles below every brute-force FIFO")
    out.check(all(r.verdict == "ok" for r in rows), "all verdicts ok")
    out.check(gray2.mean_latency_rx_cycles >= 2, f"gray 2-stage one-way {float(gray2.mean_latency_rx_cycles):.3f} >= 2")


def _sweep(cfg: ExperimentConfig, out: Outcome, ratio: Optional[Fraction]) -> None:
    ratios = [ratio] if ratio is not None else list(SWEEP_RATIOS)
    try:
        rows = throughput_sweep(cfg, ratios, assert_full=False)
    except ValueError as e:
        raise UsageError(str(e)) from e
    for row in rows:
        out.row(design=cfg.fifo.design, credit_pairs=cfg.fifo.credit_pairs, ratio=f"{float(row.ratio):g}",
                tx_period_ps=row.tx_period, rx_period_ps=row.rx_period, seed=cfg.seed, words=cfg.n_words,
                throughput_words_per_slow_cycle=row.throughput, verdict=row.verdict)
        asserted = cfg.fifo.design == "pausible" and cfg.fifo.credit_pairs >= 2 and 1 <= row.ratio <= 2
        label = f"ratio {float(row.ratio):g}: {float(row.throughput):.4f} words/slow cycle"
        if asserted:
            out.check(row.throughput >= Fraction(99, 100), label + " >= 0.99")
        else:
            out.summary.append(f"INFO  {label} (reported)")
        out.check(row.verdict == "ok", f"ratio {float(row.ratio):g}: verdict {row.verdict}")


def _stari(cfg: ExperimentConfig, out: Outcome) -> None:
    period = cfg.tx_clock.period
    depth = cfg.fifo.depth
    bound = slack_bound(depth, period)
    tx = ClockDomain(0, period)
    rx = ClockDomain(1, period)
    for skew, beyond in ((0, False), (bound * 3 // 4, False), (-(bound * 3 // 4), False),
                         (bound * 3 // 2, True), (-(bound * 3 // 2), True)):
        res = elastic_link_run(tx, rx, skew, depth, cfg.n_words, cfg.fifo.stage_forward, cfg.fifo.stage_backward)
        out.row(depth=depth, period_ps=period, skew_ps=skew, slack_bound_ps=bound, words=cfg.n_words,
                delivered=res.delivered, failures=res.failures, overflows=res.overflows,
                underflows=res.underflows, expect_failures="yes" if beyond else "no")
        if beyond:
            out.check(res.failures >= 1, f"skew {skew} ps (beyond bound {bound}): {res.failures} failures detected")
        else:
            out.check(res.failures == 0, f"skew {skew} ps (within bound {bound}): {res.failures} failures")


def _negative(cfg: ExperimentConfig, out: Outcome) -> None:
    cfg = dataclasses.replace(cfg, fifo=dataclasses.replace(cfg.fifo, design="unsafe-binary"),
                              stress=Stress(True, 1.0))
    try:
        r = run_experiment(cfg)
    except LivelockError as e:
        out.summary.append(f"INFO  run stalled: {e}")
        out.check(True, "unsafe binary FIFO lost liveness (violation observed)")
        return
    m = r.metrics
    out.row(design=cfg.fifo.design, tx_period_ps=cfg.tx_clock.period, rx_period_ps=cfg.rx_clock.period,
            seed=cfg.seed, words=cfg.n_words, delivered=m.delivered, verdict=r.verdict,
            scoreboard_violations=m.scoreboard_violations, overflows=m.overflows, underflows=m.underflows,
            stale_violations=m.stale_violations, flag_violations=m.flag_violations)
    out.summary.append(f"INFO  {m.stale_violations} remote-pointer views ahead of truth, "
                       f"{m.flag_violations} optimistic flags")
    out.check(m.scoreboard_violations > 0,
              f"unsafe binary FIFO: {m.scoreboard_violations} scoreboard violations (expected > 0)")


def _gray(cfg: ExperimentConfig, out: Outcome) -> None:
    for width in range(2, 17):
        c = exhaustive_check(width)
        out.row(width=width, codes=c.codes, bijective=c.bijective, single_bit_steps=c.single_bit_steps,
                full_empty_agree=c.full_empty_agree, pairs_checked=c.pairs_checked)
        out.check(c.ok, f"width {width}: {c.codes} codes")


def run_scenario(name: str, cfg: ExperimentConfig, ratio: Optional[Fraction] = None) -> Outcome:
    if name not in SCENARIOS:
        raise UsageError(f"unknown scenario {name!r}; choose from {', '.join(SCENARIOS)}")
    out = Outcome(name)
    if name == "integrity":
        _integrity(cfg, out)
    elif name == "latency-compare":
        _latency(cfg, out)
    elif name == "throughput-sweep":
        _sweep(cfg, out, ratio)
    elif name == "stari-skew":
        _stari(cfg, out)
    elif name == "negative-control":
        _negative(cfg, out)
    else:
        _gray(cfg, out)
    return out


def render_csv(out: Outcome) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(out.columns)
    w.writerows(out.rows)
    return buf.getvalue()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="cdcsim", description="Simulate clock-domain-crossing FIFOs.",
                                epilog=_defaults_help(), formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("--config", metavar="PATH", help="key = value config file with [sections]")
    p.add_argument("--scenario", default="integrity", choices=SCENARIOS, help="what to run (default: integrity)")
    p.add_argument("--seed", type=int, help="unsigned 64-bit seed (fallback: CDCSIM_SEED, then file, then 0)")
    p.add_argument("--words", type=int, help="words per run (default 10000)")
    p.add_argument("--out", metavar="PATH", help="CSV destination (default: stdout)")
    p.add_argument("--ratio", metavar="TX:RX", help="tx:rx clock frequency ratio; slower clock keeps its period")
    p.add_argument("--design", choices=DESIGNS, help="FIFO design (default gray)")
    return p


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    try:
        ratio = parse_ratio(args.ratio) if args.ratio else None
        if args.seed is not None and not 0 <= args.seed < 2**64:
            raise UsageError("--seed must be an unsigned 64-bit integer")
        cfg = parse_config(args.config, seed=args.seed, words=args.words,
                           ratio=ratio if args.scenario != "throughput-sweep" else None, design=args.design)
        outcome = run_scenario(args.scenario, cfg, ratio)
    except (UsageError, ConfigError) as e:
        print(f"cdcsim: error: {e}", file=sys.stderr)
        return 2
    text = render_csv(outcome)
    summary_stream = sys.stdout
    if args.out:
        try:
            with open(args.out, "w", encoding="utf-8", newline="") as fh:
                fh.write(text)
        except OSError as e:
            print(f"cdcsim: error: cannot write {args.out}: {e.strerror or e}", file=sys.stderr)
            return 2
    else:
        sys.stdout.write(text)
        summary_stream = sys.stderr
    for line in outcome.summary:
        print(line, file=summary_stream)
    return 1 if outcome.failures else 0


if __name__ == "__main__":
    sys.exit(main())
