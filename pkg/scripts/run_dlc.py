#!/usr/bin/env python3
"""Double lane change at 40 and 100 km/h, FIS on against FIS off."""

import argparse
import os

from edtsc.config import SimConfig, load_config
from edtsc.harness import compute_metrics, run_scenario, write_outputs


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--config")
    ap.add_argument("--speeds", type=float, nargs="+", default=[40.0, 100.0])
    ap.add_argument("--out", default="out/dlc")
    args = ap.parse_args()
    cfg = load_config(args.config) if args.config else SimConfig()
    for kmh in args.speeds:
        logs = {}
        for flag in (True, False):
            name = "fis_on" if flag else "fis_off"
            logs[name] = run_scenario(cfg.with_sim(scenario="dlc", speed_kmh=kmh, fis=flag))
            write_outputs(logs[name], os.path.join(args.out, f"{kmh:g}kmh", name))
        m = compute_metrics(logs["fis_on"], logs["fis_off"])
        print(f"# {kmh:g} km/h, lane violations: on={logs['fis_on'].meta['lane_violations']}"
              f" off={logs['fis_off'].meta['lane_violations']}")
        print(m.to_text(), end="")


if __name__ == "__main__":
    main()
