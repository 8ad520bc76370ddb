#!/usr/bin/env python3
"""Run one experiment from a key=value config and write its CSV next to the config.

    python3 scripts/run_experiment.py scripts/configs/blowup_repulsive.cfg [key=value ...]
"""

import sys
import time
from pathlib import Path

from graphnls.experiments import parse_config, run_experiment, spec_from_mapping


def main(argv):
    if not argv:
        print(__doc__)
        return 1
    cfg = Path(argv[0])
    mapping = parse_config(cfg)
    for item in argv[1:]:
        key, _, value = item.partition("=")
        mapping[key.replace("-", "_")] = value
    mapping.setdefault("out", str(cfg.with_suffix(".csv")))
    spec = spec_from_mapping(mapping)
    t0 = time.perf_counter()
    report = run_experiment(spec)
    print(report.header(), end="")
    print(report.table())
    print(f"# wall_seconds={time.perf_counter() - t0:.1f} -> {spec.out}")
    return 0 if report.passed else 3


if __name__ == "__main__":
    sys.exit(main(sys.argv[1:]))
