"""Print a summary.csv as one table per metric: modes down, loads across.

    python scripts/report.py results/default/summary.csv
"""

import argparse
import csv

METRICS = (("pdr_mean", "PDR", "{:.3f}"), ("e2e_mean_s", "mean e2e delay (s)", "{:.3f}"),
           ("throughput_mean_pps", "sink throughput (pkt/s)", "{:.1f}"),
           ("meter_pdr_mean", "meter PDR", "{:.3f}"), ("gain_pps", "gain vs NONE (pkt/s)", "{:.1f}"))


def main(path: str):
    rows = list(csv.DictReader(open(path)))
    loads = sorted({float(r["load"]) for r in rows})
    modes = list(dict.fromkeys(r["mode"] for r in rows))
    cell = {(r["mode"], float(r["load"])): r for r in rows}
    for key, title, f in METRICS:
        print(f"\n{title}")
        print(f"{'mode':14s}" + "".join(f"{l:>9g}" for l in loads))
        for m in modes:
            vals = []
            for l in loads:
                v = cell.get((m, l), {}).get(key, "")
                vals.append(f.format(float(v)) if v else "-")
            print(f"{m:14s}" + "".join(f"{v:>9s}" for v in vals))


if __name__ == "__main__":
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("summary", nargs="?", default="results/default/summary.csv")
    main(ap.parse_args().summary)
