"""Command-line entry point: ``run``, ``compare`` and ``selftest``.

Exit codes: 0 success, 1 configuration error, 2 numerical failure,
3 input/output error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import sys

from .config import ConfigError, SimConfig, load_config
from .fis import FISError
from .harness import SimLog, SimulationError, compute_metrics, run_scenario, write_outputs
from .scenarios import TrackError

EXIT_OK = 0
EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3

log = logging.getLogger("edtsc")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="edtsc", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="cmd", required=True)

    run = sub.add_parser("run", help="simulate one scenario and write states.csv/metrics.txt")
    run.add_argument("--config", help="TOML configuration file")
    run.add_argument("--scenario", choices=("track", "dlc"))
    run.add_argument("--speed-kmh", type=float)
    run.add_argument("--fis", choices=("on", "off"))
    run.add_argument("--dt", type=float)
    run.add_argument("--duration", type=float)
    run.add_argument("--track-csv", help="curvature CSV replacing the synthetic track")
    run.add_argument("--out", help="output directory")

    cmp_ = sub.add_parser("compare", help="reduction metrics of run A against baseline B")
    cmp_.add_argument("--a", required=True, help="output directory of the FIS-on run")
    cmp_.add_argument("--b", required=True, help="output directory of the baseline run")
    cmp_.add_argument("--out", help="write the metrics here as well as to stdout")

    st = sub.add_parser("selftest", help="run the built-in numeric property checks")
    st.add_argument("--seed", type=int, default=0)
    return ap


def _config_from_args(args) -> SimConfig:
    cfg = load_config(args.config) if args.config else SimConfig()
    kw = {}
    if args.scenario is not None:
        kw["scenario"] = args.scenario
    if args.speed_kmh is not None:
        kw["speed_kmh"] = args.speed_kmh
    if args.fis is not None:
        kw["fis"] = args.fis == "on"
    if args.dt is not None:
        kw["dt"] = args.dt
    if args.duration is not None:
        kw["duration"] = args.duration
    if args.out is not None:
        kw["out"] = args.out
    try:
        cfg = cfg.with_sim(**kw)
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc
    if args.track_csv:
        from dataclasses import replace
        cfg = replace(cfg, track=replace(cfg.track, csv=args.track_csv))
    if cfg.sim.dt * cfg.observer.omega_c >= 2.0:
        raise ConfigError("dt*omega_c of the disturbance observer must stay below 2")
    return cfg


def _read_meta(path) -> dict:
    meta = {}
    if not os.path.exists(path):
        return meta
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line or "=" not in line:
                continue
            k, v = line.split("=", 1)
            try:
                meta[k] = float(v)
            except ValueError:
                meta[k] = v
    return meta


def read_run(out_dir) -> SimLog:
    """Load ``states.csv`` plus the completion time recorded in ``metrics.txt``."""
    log_ = SimLog.from_csv(os.path.join(out_dir, "states.csv"))
    meta = _read_meta(os.path.join(out_dir, "metrics.txt"))
    ct = meta.get("completion_time")
    if isinstance(ct, float) and math.isfinite(ct):
        log_.meta["completion_time"] = ct
    return log_


def _cmd_run(args) -> int:
    cfg = _config_from_args(args)
    log.info("running %s at %.1f km/h, fis=%s", cfg.sim.scenario, cfg.sim.speed_kmh,
             cfg.sim.fis)
    sim_log = run_scenario(cfg)
    metrics = compute_metrics(sim_log)
    write_outputs(sim_log, cfg.sim.out, metrics)
    sys.stdout.write(metrics.to_text())
    return EXIT_OK


def _cmd_compare(args) -> int:
    a = read_run(args.a)
    b = read_run(args.b)
    try:
        m = compute_metrics(a, b)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    text = m.to_text()
    sys.stdout.write(text)
    if args.out:
        with open(args.out, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


def _cmd_selftest(args) -> int:
    from .selftest import run_selftest
    ok = True
    for r in run_selftest(args.seed):
        ok &= r.passed
        print(f"{'PASS' if r.passed else 'FAIL'} {r.name}: {r.detail}")
    return EXIT_OK if ok else EXIT_NUMERIC


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    handlers = {"run": _cmd_run, "compare": _cmd_compare, "selftest": _cmd_selftest}
    try:
        return handlers[args.cmd](args)
    except (ConfigError, TrackError) as exc:
        log.error("configuration error: %s", exc)
        return EXIT_CONFIG
    except (SimulationError, FISError, FloatingPointError) as exc:
        log.error("numerical failure: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        log.error("i/o error: %s", exc)
        return EXIT_IO


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
