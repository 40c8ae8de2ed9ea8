"""Run the reactor diagnosis benchmark and write its reports.

Writes ``reactor_report.txt`` (per-case tables plus the pooled table) and
``reactor_report.csv`` into the output directory, and prints the pooled
table.

    python3 scripts/run_reactor.py --out results/
"""

import argparse
import time
from pathlib import Path

from uisbench.harness import reactor_benchmark


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    t0 = time.perf_counter()
    res = reactor_benchmark()
    elapsed = time.perf_counter() - t0

    (out / "reactor_report.txt").write_text(res.to_table())
    (out / "reactor_report.csv").write_text(res.to_csv())
    print(f"prior: {res.prior_report}")
    for c in res.cases:
        print(f"case {c.name}: {c.solver_report}")
    print()
    print(res.pooled.to_table())
    print(f"{elapsed:.1f} s; reports in {out}/")


if __name__ == "__main__":
    main()
