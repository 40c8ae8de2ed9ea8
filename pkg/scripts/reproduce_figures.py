"""Write the curve tables of the single-rule figures as CSV.

One file per preset, ``fig<N>.csv`` with columns x, engine, value, plus
the belief pathology table ``dst_pathology.csv``.  Nothing is plotted.

    python3 scripts/reproduce_figures.py --out results/ --step 0.01
"""

import argparse
from pathlib import Path

from uisbench.belief import pathology_csv, pathology_sweep
from uisbench.harness import FIGURES, figure_spec, sweep


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--step", type=float, default=0.01)
    ap.add_argument("--figures", default=",".join(map(str, FIGURES)))
    args = ap.parse_args()
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for n in (int(k) for k in args.figures.split(",")):
        spec = figure_spec(n, args.step)
        table = sweep(spec)
        path = out / f"fig{n}.csv"
        path.write_text(table.to_csv())
        fixed = ", ".join(f"{k}={v}" for k, v in spec.fixed.items())
        print(f"fig {n}: {spec.op} over {spec.x} ({fixed}); {len(table.rows)} rows -> {path}")

    betas = [10.0**-k for k in range(1, 10)] + [0.0]
    path = out / "dst_pathology.csv"
    path.write_text(pathology_csv(pathology_sweep(betas)))
    print(f"belief pathology -> {path}")


if __name__ == "__main__":
    main()
