#!/usr/bin/env python3
"""Run the track scenario with and without the fuzzy integration and
print the reduction metrics.  Outputs land in ``<out>/fis_on`` and
``<out>/fis_off``."""

import argparse
import os

from edtsc.config import SimConfig, load_config
from edtsc.harness import compute_metrics, run_scenario, write_outputs


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--config")
    ap.add_argument("--out", default="out/track")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else SimConfig()
    cfg = cfg.with_sim(scenario="track")
    logs = {}
    for flag in (True, False):
        name = "fis_on" if flag else "fis_off"
        logs[name] = run_scenario(cfg.with_sim(fis=flag))
        write_outputs(logs[name], os.path.join(args.out, name))
    print(compute_metrics(logs["fis_on"], logs["fis_off"]).to_text(), end="")


if __name__ == "__main__":
    main()
