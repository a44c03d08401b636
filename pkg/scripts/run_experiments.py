"""Run every CLI experiment on the bundled configs and collect the artifacts.

Usage: python3 scripts/run_experiments.py [--out results] [--replicas N]
"""

import argparse
import json
import sys
from pathlib import Path

from hawkes_stability.cli import main as cli

ROOT = Path(__file__).resolve().parents[1]
POP = str(ROOT / "configs" / "population.json")
TWO = str(ROOT / "configs" / "two_type.json")

JOBS = [
    ("simulate", POP, "events_thinning.csv", ["--sampler", "thinning"]),
    ("simulate", POP, "events_cluster.csv", ["--sampler", "cluster"]),
    ("attribute", POP, "attribution.csv", []),
    ("couple", POP, "coupling.csv", []),
    ("tvbound", POP, "tvbound.csv", []),
    ("mgf", POP, "mgf.json", []),
    ("meanfield", POP, "meanfield.json", []),
    ("tails", POP, "tails.json", []),
    ("check", POP, "check.json", []),
    ("recurrence", POP, "recurrence.json", []),
    ("multitype", TWO, "multitype.csv", []),
    ("check", TWO, "check_two_type.json", []),
]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--replicas", type=int, default=None)
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    status = {}
    for cmd, cfg, name, extra in JOBS:
        argv = [cmd, "--config", cfg, "--out", str(out / name), *extra]
        if args.replicas is not None:
            argv += ["--replicas", str(args.replicas)]
        status[name] = cli(argv)
        print(f"{cmd:<11} {name:<22} exit {status[name]}")
    (out / "status.json").write_text(json.dumps(status, indent=2) + "\n")
    return max(status.values())


if __name__ == "__main__":
    sys.exit(main())
