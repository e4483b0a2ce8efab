"""FNDR comparison of the MRF sampler and the mixture baseline on the simulation scenarios.

Writes one TSV row per (scenario, method) with mean FNDR, realized FDR and the
one-sided Welch p-value that the MRF has the lower FNDR.

    python scripts/run_benchmarks.py --reps 20 --out bench.tsv scenario5-less scenario6-less
"""

from __future__ import annotations

import argparse
import sys

from chipmrf.simeval import BenchSettings, format_text, format_tsv, load_scenario, presets, run_benchmark


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("scenarios", nargs="*", help="preset names or config files (default: every preset)")
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--fdr", type=float, default=0.05)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--iters", type=int, default=3000)
    ap.add_argument("--burnin", type=int, default=1000)
    ap.add_argument("--workers", type=int, default=1)
    ap.add_argument("--out", help="TSV output (default: stdout)")
    a = ap.parse_args()

    rows = []
    for name in a.scenarios or list(presets()):
        res = run_benchmark(load_scenario(name), a.reps, alpha=a.fdr, seed=a.seed,
                            settings=BenchSettings(a.fdr, a.iters, a.burnin), workers=a.workers)
        rows += res.rows()
        sys.stderr.write(res.to_text())
    text = format_tsv(rows)
    if a.out:
        with open(a.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    sys.stderr.write("\n" + format_text(rows))


if __name__ == "__main__":
    main()
