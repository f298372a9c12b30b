"""``simulate`` command-line entry point."""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from pathlib import Path

from .harness import ConfigError, load_config, run_experiment, write_outputs


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simulate",
                                 description="Run the region/beamforming experiment grid.")
    ap.add_argument("--config", required=True, type=Path, help="key = value configuration file")
    ap.add_argument("--out", required=True, type=Path, help="output directory")
    ap.add_argument("--model", choices=("sector", "ula"), help="override the antenna model")
    ap.add_argument("--seed", type=int, help="override base_seed")
    ap.add_argument("--replicates", type=int, help="override the replicate count")
    ap.add_argument("--trace", action="store_true",
                    help="dump per-run round traces, region tables, beam logs and edge lists")
    ap.add_argument("--jobs", type=int, default=1, help="worker processes (default 1)")
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        overrides = {k: v for k, v in (("model", args.model), ("base_seed", args.seed),
                                       ("replicates", args.replicates)) if v is not None}
        cfg = dataclasses.replace(cfg, **overrides)
    except (OSError, ConfigError) as exc:
        print(f"simulate: {exc}", file=sys.stderr)
        return 2
    records = run_experiment(cfg, jobs=args.jobs,
                             dump_dir=args.out / "runs" if args.trace else None)
    write_outputs(records, args.out)
    logging.info("wrote %d records to %s", len(records), args.out / "records.csv")
    return 0


if __name__ == "__main__":
    sys.exit(main())
