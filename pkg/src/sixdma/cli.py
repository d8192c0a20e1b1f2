"""Command line entry point: ``optimize``, ``sweep`` and ``plot``."""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from .harness import (PATTERNS, ConfigError, emit_csv, emit_plot, layout_filename, load_config,
                      read_csv, run_experiment, save_layout)
from .schemes import SchemeKind

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME = 0, 2, 3


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sixdma", description="6DMA sensing pose optimization")
    sub = ap.add_subparsers(dest="command", required=True)

    opt = sub.add_parser("optimize", help="optimize one scheme for one seed and save the layout")
    opt.add_argument("--config", required=True)
    opt.add_argument("--scheme", required=True, choices=[k.value for k in SchemeKind])
    opt.add_argument("--pattern", required=True, choices=PATTERNS)
    opt.add_argument("--seed", type=int, default=0)
    opt.add_argument("--out", required=True, type=Path)

    sw = sub.add_parser("sweep", help="run every scheme, pattern and seed of a config")
    sw.add_argument("--config", required=True)
    sw.add_argument("--out", required=True, type=Path)

    pl = sub.add_parser("plot", help="plot CRB versus power from a sweep directory or CSV")
    pl.add_argument("--in", dest="source", required=True, type=Path)
    pl.add_argument("--out", required=True, type=Path)
    return ap


def _write(records, out: Path, config_hash: str) -> None:
    out.mkdir(parents=True, exist_ok=True)
    emit_csv(records, out / "results.csv")
    seen = set()
    for r in records:
        key = (r.scheme, r.pattern, r.seed)
        if key not in seen:
            seen.add(key)
            save_layout(r.layout, out / "layouts" / layout_filename(*key), config_hash)


def _report(records) -> None:
    for r in records:
        flag = "" if r.feasible else "  INFEASIBLE"
        print(f"{r.pattern:9s} {r.scheme:5s} seed {r.seed:<3d} {r.power_dbm:6.1f} dBm  "
              f"CRB {r.report.total:.4e} rad^2{flag}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    try:
        if args.command == "plot":
            src = args.source / "results.csv" if args.source.is_dir() else args.source
            rows = read_csv(src)
            if len({r["config_hash"] for r in rows}) > 1:
                raise ConfigError(f"{src} mixes results from different configs")
            emit_plot(rows, args.out)
            print(f"wrote {args.out}")
            return EXIT_OK
        config = load_config(args.config)
        if args.command == "optimize":
            records = run_experiment(config, schemes=[args.scheme], patterns=[args.pattern],
                                     seeds=[args.seed])
        else:
            records = run_experiment(config)
        _write(records, args.out, config.hash)
        _report(records)
        print(f"wrote {args.out / 'results.csv'} ({len(records)} rows)")
        return EXIT_OK
    except ConfigError as err:
        print(f"config error: {err}", file=sys.stderr)
        return EXIT_CONFIG
    except (OSError, ValueError, np.linalg.LinAlgError) as err:
        print(f"error: {err}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
