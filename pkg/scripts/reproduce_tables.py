"""Run every published table block and compare against the printed values.

    python3 scripts/reproduce_tables.py --tables 1 2 --out runs/
"""
from __future__ import annotations

import argparse
import logging
import time
from pathlib import Path

from smectic_c0ip.driver import emit_table, run_study
from smectic_c0ip.reference import BLOCKS, N_LIST, config_for


def compare(block, report) -> list[str]:
    lines = []
    for col, ref in block.errors.items():
        got = [getattr(lv, col) for lv in report.levels]
        dev = max(abs(g / r - 1) for g, r in zip(got, ref))
        lines.append(f"  {col:10s} max rel. deviation {dev:6.2%}  "
                     + " ".join(f"{g:.2e}/{r:.2e}" for g, r in zip(got, ref)))
    return lines


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--tables", type=int, nargs="+", default=[1, 2, 3, 4, 5, 6])
    ap.add_argument("--out", type=Path, default=Path("runs"))
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("-v", "--verbose", action="store_true")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    args.out.mkdir(parents=True, exist_ok=True)

    for block in BLOCKS:
        if block.table not in args.tables:
            continue
        name = block.label.replace(" ", "_").replace("=", "")
        cfg = config_for(block, output_path=args.out / f"{name}.csv", jobs=args.jobs)
        t0 = time.perf_counter()
        report = run_study(cfg)
        print(f"{block.label} (N={list(N_LIST)}, {time.perf_counter() - t0:.1f}s)")
        print(emit_table(report, "markdown"))
        print("\n".join(compare(block, report)), "\n", flush=True)


if __name__ == "__main__":
    main()
