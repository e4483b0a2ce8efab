"""Acceptance checks, one test per criterion, each at its stated tolerance.

These are the long-running end-to-end checks (roughly 40 minutes on one
core, most of it in the performance and calibration runs). Select them with
``pytest tests/test_acceptance.py`` or skip them with ``-m "not acceptance"``.
"""

import itertools
import json
import math
import subprocess
import sys
import time
from dataclasses import replace
from pathlib import Path

import numpy as np
import pytest
from scipy import stats

from chipmrf.chain import ChainParams, LatentChain, chain_logdensity, sample_chain, stationary_prob
from chipmrf.cli import main
from chipmrf.data import Condition, CountMatrix, ExperimentDesign
from chipmrf.distributions import (
    NbParams,
    PoissonParams,
    ZeroInflation,
    nb_logpmf,
    negbin,
    pois_logpmf,
    poisson,
    sample,
    tail_bound_ymax,
    zinb_dist,
    zinb_logpmf,
    zip_dist,
    zip_logpmf,
)
from chipmrf.inference import ReplicateParams, SamplerConfig, exact_posterior, forward_backward, gibbs_marginals, run_sampler
from chipmrf.mixture import bic_table
from chipmrf.simeval import BenchSettings, generate, get_scenario, run_benchmark, run_differential_benchmark

pytestmark = pytest.mark.acceptance

ROOT = Path(__file__).resolve().parents[1]
ALPHA = 0.05


def _random_instance(rng, family):
    m = int(rng.integers(1, 11))
    q = ChainParams(*rng.uniform(0.05, 0.95, 2))
    reps = []
    for _ in range(int(rng.integers(1, 3))):
        pi, bg = rng.uniform(0.3, 1.0), rng.uniform(0.2, 1.5)
        sig = bg + rng.uniform(0.5, 5.0)
        if family == "zip":
            reps.append(ReplicateParams.zip(pi, bg, sig))
        else:
            reps.append(ReplicateParams.zinb(pi, bg, rng.uniform(0.3, 5.0), sig, rng.uniform(0.3, 5.0)))
    x = sample_chain(m, q, rng).states
    y = np.column_stack([np.where(x == 1, r.signal.sample(m, rng), r.background.sample(m, rng)) for r in reps])
    return y, reps, q


def test_criterion_01_oracle_equivalence():
    t0 = time.perf_counter()
    rng = np.random.default_rng(101)
    gibbs_err, fb_err = [], []
    for k in range(50):
        y, reps, q = _random_instance(rng, ("zip", "zinb")[k % 2])
        exact = exact_posterior(y, reps, q)
        fb_err.append(np.max(np.abs(exact - forward_backward(y, reps, q))))
        gibbs_err.append(np.max(np.abs(exact - gibbs_marginals(y, reps, q, 100_000, rng, burn=1000))))
    elapsed = time.perf_counter() - t0
    assert max(fb_err) < 1e-10
    assert max(gibbs_err) < 0.02
    assert elapsed < 120.0


def test_criterion_02_stationarity():
    for m, q in ((12, ChainParams(0.3, 0.7)), (11, ChainParams(0.002, 0.94)), (9, ChainParams(0.8, 0.1))):
        states = np.array(list(itertools.product((0, 1), repeat=m)), dtype=np.int8)
        dens = np.exp([chain_logdensity(LatentChain(s), q) for s in states])
        assert dens.sum() == pytest.approx(1.0, abs=1e-12)
        np.testing.assert_allclose(dens @ states, stationary_prob(q), atol=1e-12)
    rng = np.random.default_rng(102)
    for q in (ChainParams(0.003, 0.866), ChainParams(0.02, 0.98), ChainParams(0.3, 0.5)):
        m = 100_000
        x = sample_chain(m, q, rng).states
        p = stationary_prob(q)
        rho = q.q1 - q.q0  # lag-one autocorrelation of the two-state chain
        se = math.sqrt(p * (1 - p) / m * (1 + rho) / (1 - rho))
        assert abs(x.mean() - p) < 3 * se


def test_criterion_03_scenario5_mrf_beats_mixture():
    t0 = time.perf_counter()
    res = run_benchmark(get_scenario("scenario5-less"), reps=20, alpha=ALPHA, seed=103)
    elapsed = time.perf_counter() - t0
    assert not any(res.failures.values())
    assert res.mean_fndr("mrf") < res.mean_fndr("mixture")
    assert res.p_value("mixture") < 0.01
    assert res.mean_fndr("mrf") < 0.004
    assert elapsed <= 30 * 60


def test_criterion_04_scenario6_methods_agree():
    res = run_benchmark(get_scenario("scenario6-less"), reps=20, alpha=ALPHA, seed=104)
    assert not any(res.failures.values())
    assert abs(res.mean_fndr("mrf") - res.mean_fndr("mixture")) < 0.002
    assert res.p_value("mixture") > 0.05


def test_criterion_05_scenario1_fndr():
    res = run_benchmark(get_scenario("scenario1-more"), reps=20, methods=["mrf"], alpha=ALPHA, seed=105)
    assert not res.failures["mrf"]
    assert 0.0 <= res.mean_fndr("mrf") <= 0.006


def test_criterion_06_fdr_calibration():
    enr = run_benchmark(get_scenario("scenario1-more"), reps=50, methods=["mrf"], alpha=ALPHA, seed=106)
    assert not enr.failures["mrf"]
    assert np.mean(enr.fdr["mrf"]) <= 0.08
    diff = run_differential_benchmark(get_scenario("scenario5-less"), reps=50, alpha=ALPHA, seed=106)
    assert np.mean([ev.realized_fdr for ev in diff]) <= 0.08


def test_criterion_07_bic_prefers_zero_inflation():
    scn = replace(get_scenario("scenario1-more"), n_bins=1_000_000)
    wins = 0
    for rep in range(100):
        _, data = generate(scn, np.random.default_rng([107, rep]))
        row = bic_table(data)[0]
        wins += row["bic_zinb"] < row["bic_nb"]
    assert wins >= 95


def _two_condition_data(rng, m):
    cols = []
    for q1 in (0.8, 0.9):
        q = ChainParams(0.03 * (1 - q1) / 0.97, q1)  # stationary probability 0.03 for both
        assert stationary_prob(q) == pytest.approx(0.03)
        x = sample_chain(m, q, rng).states
        cols.append(np.where(x == 1, rng.poisson(4.0, m), rng.poisson(0.5, m) * (rng.random(m) < 0.7)))
    return CountMatrix.from_array(np.column_stack(cols), ["a", "b"])


def test_criterion_08_constrained_model():
    rng = np.random.default_rng(108)
    data = _two_condition_data(rng, 100_000)
    design = ExperimentDesign([Condition("A", ["a"]), Condition("B", ["b"])])
    post = run_sampler(data, design, family="zip", cfg=SamplerConfig(3000, 1000, seed=108, constrained=True))
    for c in ("A", "B"):
        assert abs(post.mean(f"{c}.p1") - 0.03) < 0.01
    # one condition: the constrained parameterization is the unconstrained model in other coordinates
    x = sample_chain(3000, ChainParams(0.01, 0.9), rng).states
    one = CountMatrix.from_array(np.where(x == 1, rng.poisson(4.0, 3000), rng.poisson(0.5, 3000)))
    cfg = SamplerConfig(51_000, 1000, thinning=5, seed=8)
    u = run_sampler(one, family="zip", cfg=cfg).column("c1.p1")
    c = run_sampler(one, family="zip", cfg=replace(cfg, constrained=True)).column("c1.p1")
    assert len(u) == len(c) == 10_000
    qs = np.linspace(0.01, 0.99, 99)
    slope = np.polyfit(np.quantile(u, qs), np.quantile(c, qs), 1)[0]
    assert 0.95 <= slope <= 1.05


def _chisq_pvalue(dist, seed):
    n = 100_000
    draws = sample(dist, n, np.random.default_rng(seed))
    pmf = np.exp(dist.table(tail_bound_ymax(dist, 1e-12)))
    exp_counts = n * pmf
    cut = int(np.flatnonzero(exp_counts >= 5)[-1])
    expected = np.append(exp_counts[:cut], n - exp_counts[:cut].sum())
    observed = np.append(np.bincount(np.minimum(draws, cut), minlength=cut + 1)[:cut], (draws >= cut).sum())
    return stats.chisquare(observed, expected).pvalue


def test_criterion_09_distribution_suite():
    rng = np.random.default_rng(109)
    failures = []
    # normalization over random parameterizations
    for _ in range(200):
        mu, phi, pi = rng.uniform(0.01, 50), rng.uniform(0.05, 100), rng.uniform(0, 1)
        for d in (poisson(mu), negbin(mu, phi), zip_dist(pi, mu), zinb_dist(pi, mu, phi)):
            total = np.exp(d.table(tail_bound_ymax(d, 1e-8))).sum()
            if not 1 - 1e-6 <= total <= 1 + 1e-12:
                failures.append(f"normalization {d}: {total}")
    # unit weight reduces to the count kernel
    y = np.arange(200)
    for mu, phi in rng.uniform(0.05, 30, (50, 2)):
        if np.max(np.abs(zinb_logpmf(y, ZeroInflation(1.0), NbParams(mu, phi)) - nb_logpmf(y, NbParams(mu, phi)))) > 1e-12:
            failures.append(f"zinb reduction mu={mu} phi={phi}")
        if np.max(np.abs(zip_logpmf(y, ZeroInflation(1.0), PoissonParams(mu)) - pois_logpmf(y, PoissonParams(mu)))) > 1e-12:
            failures.append(f"zip reduction mu={mu}")
    # NB -> Poisson limit, stated for y <= 20 at mu = 3, phi = 1e6
    y = np.arange(21)
    gap = np.abs(nb_logpmf(y, NbParams(3.0, 1e6)) - pois_logpmf(y, PoissonParams(3.0)))
    if gap.max() >= 1e-4:
        failures.append(f"NB->Poisson gap {gap.max():.4g} at y={int(gap.argmax())}")
    # sampler against pmf
    for k, d in enumerate((poisson(3.0), negbin(6.95, 0.89), zip_dist(0.5, 1.0), zinb_dist(0.66, 0.33, 2.01))):
        if _chisq_pvalue(d, 900 + k) <= 1e-3:
            failures.append(f"chi-square {d}")
    assert not failures, failures


def test_criterion_10_performance_envelope():
    script = ROOT / "scripts" / "perf_run.py"
    runs = {}
    for iters, burn in ((500, 250), (10_000, 5_000)):
        out = subprocess.run([sys.executable, str(script), "--bins", "1000000", "--iters", str(iters), "--burnin", str(burn)],
                             capture_output=True, text=True, check=True)
        runs[iters] = json.loads(out.stdout)
    full, short = runs[10_000], runs[500]
    assert full["replicates"] == 2
    assert full["seconds"] < 60 * 60
    mr = full["bins"] * full["replicates"]
    # O(M R) working set, and nothing that grows with the iteration count beyond the retained draws
    assert full["peak_traced_bytes"] < 100 * mr
    grown = full["peak_traced_bytes"] - short["peak_traced_bytes"]
    assert grown <= (full["retained_bytes"] - short["retained_bytes"]) + 1_000_000


def _same_twice(tmp_path, argv, outputs):
    seen = []
    for _ in range(2):
        summary = tmp_path / "summary.json"
        assert main([*argv, "--summary", str(summary)]) == 0
        seen.append([summary.read_bytes()] + [(tmp_path / o).read_bytes() for o in outputs])
    return seen[0] == seen[1]


def test_criterion_11_cli_determinism(tmp_path, data_dir):
    d, t = str(data_dir), str(tmp_path)
    commands = {
        "bin": (["bin", "--reads", f"{d}/reads_a.tsv", f"{d}/reads_b.tsv", "--genome", f"{d}/genome.tsv",
                 "--exclude", f"{d}/exclude.bed", "-o", f"{t}/c.tsv"], ["c.tsv"]),
        "simulate": (["simulate", "--scenario", "scenario5-less", "--seed", "7", "--differential", "-o", f"{t}/s.tsv",
                      "--truth", f"{t}/truth.tsv"], ["s.tsv", "truth.tsv"]),
        "fit-mrf": (["fit-mrf", "--counts", f"{d}/counts_diff.tsv", "--design", f"{d}/design.ini", "--iters", "1000",
                     "--burnin", "500", "--seed", "7", "--checkpoint", f"{t}/ck.tsv", "-o", f"{t}/p.tsv"],
                    ["p.tsv", "ck.tsv"]),
        "fit-mix": (["fit-mix", "--counts", f"{d}/counts_scenario1.tsv", "--bic", "--bic-table", f"{t}/bic.tsv",
                     "-o", f"{t}/m.tsv"], ["m.tsv", "bic.tsv"]),
        "call": (["call", "--posteriors", f"{d}/posteriors_scenario1.tsv", "--fdr", "0.05", "-o", f"{t}/c.bed",
                  "--bedgraph", f"{t}/c.bg"], ["c.bed", "c.bg"]),
        "diff": (["diff", "--posteriors", f"{d}/posteriors_diff.tsv", "--fdr", "0.05", "-o", f"{t}/d.bed"], ["d.bed"]),
        "bench": (["bench", "--scenario", f"{d}/scenario5.cfg", "--reps", "20", "--fdr", "0.05", "--seed", "7",
                   "--table", f"{t}/b.tsv"], ["b.tsv"]),
    }
    differing = [name for name, (argv, outs) in commands.items() if not _same_twice(tmp_path, argv, outs)]
    assert not differing
