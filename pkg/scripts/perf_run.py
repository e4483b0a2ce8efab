"""Time and memory profile of the MRF sampler on a large simulated data set.

Prints one JSON object: wall time, retained draws, peak traced Python/numpy
memory and peak resident size. Used by the performance acceptance check.

    python scripts/perf_run.py --bins 1000000 --iters 10000 --burnin 5000
"""

from __future__ import annotations

import argparse
import json
import resource
import time
import tracemalloc
from dataclasses import replace

import numpy as np

from chipmrf.inference import SamplerConfig, run_sampler
from chipmrf.simeval import generate, get_scenario


def profile(bins: int, iters: int, burnin: int, seed: int = 0, scenario: str = "scenario5-less") -> dict:
    scn = replace(get_scenario(scenario), n_bins=bins)
    _, data = generate(scn, np.random.default_rng(seed))
    # compile the kernels outside the measured window
    run_sampler(data.subset(np.arange(min(bins, 200))), cfg=SamplerConfig(3, 1, seed=seed))
    tracemalloc.start()
    base = tracemalloc.get_traced_memory()[0]
    t0 = time.perf_counter()
    post = run_sampler(data, family=scn.fit_family, cfg=SamplerConfig(iters, burnin, seed=seed))
    wall = time.perf_counter() - t0
    cur, peak = tracemalloc.get_traced_memory()
    tracemalloc.stop()
    return {
        "bins": bins,
        "replicates": data.counts.shape[1],
        "iterations": iters,
        "burn_in": burnin,
        "seconds": wall,
        "seconds_per_iteration": wall / iters,
        "peak_traced_bytes": peak - base,
        "retained_bytes": int(post.draws.nbytes + post.prob_enriched.nbytes + post.iterations.nbytes),
        "data_bytes": int(data.counts.nbytes),
        "max_rss_kib": resource.getrusage(resource.RUSAGE_SELF).ru_maxrss,
        "mean_prob_enriched": float(post.prob_enriched.mean()),
    }


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--bins", type=int, default=1_000_000)
    ap.add_argument("--iters", type=int, default=10_000)
    ap.add_argument("--burnin", type=int, default=5_000)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--scenario", default="scenario5-less")
    a = ap.parse_args()
    print(json.dumps(profile(a.bins, a.iters, a.burnin, a.seed, a.scenario), indent=2))


if __name__ == "__main__":
    main()
