"""Command-line interface.

Every subcommand prints a JSON summary (or writes it to ``--summary``) and
exits nonzero with a single ``error: ...`` line on failure.
"""

from __future__ import annotations

import argparse
import logging
import sys

import numpy as np

from . import io
from .calling import call_differential, fdr_call, merge_regions, region_overlap
from .data import ExperimentDesign
from .inference.model import Family, PriorConfig, SamplerConfig
from .inference.sampler import run_sampler
from .mixture import bic_table, fit_em
from .simeval import (
    BenchSettings,
    format_text,
    format_tsv,
    generate,
    generate_differential,
    load_scenario,
    run_benchmark,
    scenario_to_config,
)


def _emit(args, summary: dict) -> None:
    text = io.dump_summary(summary)
    if getattr(args, "summary", None):
        with open(args.summary, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _design(args, matrix):
    design = io.read_design(args.design) if args.design else ExperimentDesign.single(matrix)
    design.column_indices(matrix)  # fail early on a mismatch
    return design


def cmd_bin(args) -> dict:
    genome = io.read_genome(args.genome)
    res = io.bin_read_files(args.reads, args.width, genome, args.labels)
    matrix = res.matrix
    if args.exclude:
        matrix = io.apply_exclusions(matrix, io.read_bed(args.exclude))
    io.write_counts(matrix, args.output)
    return {
        "command": "bin",
        "output": args.output,
        "bins": matrix.n_bins,
        "segments": len(matrix.segments),
        "columns": matrix.labels,
        "reads": res.n_reads,
        "skipped": res.n_skipped,
        "counted": int(res.matrix.counts.sum()),
    }


def cmd_fit_mrf(args) -> dict:
    matrix = io.read_counts(args.counts)
    design = _design(args, matrix)
    priors = PriorConfig.from_file(args.priors) if args.priors else PriorConfig()
    cfg = SamplerConfig(args.iters, args.burnin, args.thin, args.seed, args.constrained)
    post = run_sampler(matrix, design, Family(args.family), priors, cfg)
    io.write_posteriors(matrix, post.prob_enriched, post.conditions, args.output)
    if args.checkpoint:
        io.write_checkpoint(post, args.checkpoint)
    return {
        "command": "fit-mrf",
        "output": args.output,
        "family": args.family,
        "constrained": args.constrained,
        "bins": matrix.n_bins,
        "conditions": post.conditions,
        "iterations": args.iters,
        "burn_in": args.burnin,
        "retained": int(len(post.iterations)),
        "seed": args.seed,
        "posterior_means": post.means(),
        "acceptance": post.acceptance,
        "mean_prob_enriched": dict(zip(post.conditions, post.prob_enriched.mean(axis=0))),
    }


def cmd_fit_mix(args) -> dict:
    matrix = io.read_counts(args.counts)
    design = _design(args, matrix)
    fit = fit_em(matrix, design, Family(args.family), args.tol, args.max_iter)
    io.write_posteriors(matrix, fit.responsibilities, design.labels, args.output)
    params = {}
    for c, (lab, reps) in enumerate(zip(design.labels, fit.params.emissions.replicates)):
        params[f"{lab}.p"] = fit.params.p[c]
        for r, rep in enumerate(reps):
            params.update({f"{lab}.y{r}.{k}": v for k, v in rep.values().items()})
    rows = bic_table(matrix, tol=args.tol) if args.bic else []
    if args.bic_table:
        with open(args.bic_table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_tsv(rows))
    return {
        "command": "fit-mix",
        "output": args.output,
        "family": args.family,
        "loglik": fit.loglik,
        "n_params": fit.n_params,
        "n_obs": fit.n_obs,
        "bic": fit.bic,
        "converged": fit.converged,
        "em_iterations": len(fit.trace) - 1,
        "params": params,
        "bic_table": rows,
    }


def _write_calls(args, track, called, scores, kind: str):
    regions = merge_regions(called, track.chrom, track.start, track.end, track.seg_id, scores, kind)
    io.write_bed(regions, args.output)
    if args.bedgraph:
        io.write_bedgraph(track.chrom, track.start, track.end, scores, args.bedgraph, kind)
    return regions


def cmd_call(args) -> dict:
    track = io.read_posteriors(args.posteriors)
    label = args.column or track.labels[0]
    p = track.column(label)
    res = fdr_call(p, args.fdr)
    regions = _write_calls(args, track, res.called, p, "enriched")
    out = {
        "command": "call",
        "output": args.output,
        "column": label,
        "alpha": args.fdr,
        "called_bins": res.n_called,
        "regions": len(regions),
        "threshold": res.threshold,
        "expected_fdr": res.fdr,
    }
    if args.compare:
        other = io.read_posteriors(args.compare)
        q = other.column(args.compare_column or other.labels[0])
        res2 = fdr_call(q, args.fdr)
        regions2 = merge_regions(res2.called, other.chrom, other.start, other.end, other.seg_id, q)
        out["overlap"] = {"regions_other": len(regions2), **region_overlap(regions, regions2)}
    return out


def cmd_diff(args) -> dict:
    track = io.read_posteriors(args.posteriors)
    a, b = args.cond1 or track.labels[0], args.cond2 or track.labels[1 % len(track.labels)]
    if a == b:
        raise ValueError("differential calling needs two distinct conditions")
    p1, p2 = track.column(a), track.column(b)
    res = call_differential(p1, p2, args.fdr)
    scores = (1.0 - p1) * p2 + p1 * (1.0 - p2)
    regions = _write_calls(args, track, res.called, scores, "differential")
    return {
        "command": "diff",
        "output": args.output,
        "conditions": [a, b],
        "alpha": args.fdr,
        "called_bins": res.n_called,
        "regions": len(regions),
        "threshold": res.threshold,
        "expected_fdr": res.fdr,
    }


def cmd_simulate(args) -> dict:
    scn = load_scenario(args.scenario)
    if args.bins:
        scn.n_bins = args.bins
    rng = np.random.default_rng(np.random.SeedSequence(args.seed))
    if args.differential:
        sim = generate_differential(scn, rng, args.n_diff)
        matrix, truth, tlabels = sim.data, np.column_stack(sim.truth), ["c1", "c2"]
    else:
        t, matrix = generate(scn, rng)
        truth, tlabels = t.states[:, None], ["truth"]
    io.write_counts(matrix, args.output)
    if args.truth:
        io.write_posteriors(matrix, truth.astype(float), tlabels, args.truth)
    if args.config:
        with open(args.config, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(scenario_to_config(scn))
    return {
        "command": "simulate",
        "output": args.output,
        "scenario": scn.name,
        "seed": args.seed,
        "bins": matrix.n_bins,
        "columns": matrix.labels,
        "enriched_bins": [int(v) for v in truth.sum(axis=0)],
        "total_counts": [int(v) for v in matrix.counts.sum(axis=0)],
    }


def cmd_bench(args) -> dict:
    scn = load_scenario(args.scenario)
    if args.bins:
        scn.n_bins = args.bins
    settings = BenchSettings(args.fdr, args.iters, args.burnin)
    res = run_benchmark(scn, args.reps, args.methods, args.fdr, args.seed, settings, args.workers)
    rows = res.rows()
    if args.table:
        with open(args.table, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(format_tsv(rows))
    if args.text:
        sys.stderr.write(format_text(rows))
    return {
        "command": "bench",
        "scenario": scn.name,
        "reps": args.reps,
        "seed": args.seed,
        "alpha": args.fdr,
        "rows": rows,
        "fndr": {m: list(v) for m, v in res.fndr.items()},
        "failures": {m: [f"rep {r}: {msg}" for r, msg in v] for m, v in res.failures.items()},
    }


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="chipmrf", description="Markov random field enrichment calling for binned ChIP-seq counts.")
    ap.add_argument("-v", "--verbose", action="store_true", help="log progress and warnings to stderr")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--summary", help="write the JSON summary here instead of stdout")
        return p

    p = common(sub.add_parser("bin", help="count reads per bin"))
    p.add_argument("--reads", nargs="+", required=True, help="two-column reads files (chrom, 0-based position)")
    p.add_argument("--labels", nargs="+", help="column label per reads file (default: file stem)")
    p.add_argument("--genome", required=True, help="chromosome sizes file")
    p.add_argument("--width", type=int, default=200)
    p.add_argument("--exclude", help="BED file of excluded regions")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_bin)

    p = common(sub.add_parser("fit-mrf", help="fit the joint MRF model by MCMC"))
    p.add_argument("--counts", required=True)
    p.add_argument("--design", help="design file (default: all columns replicate one condition)")
    p.add_argument("--family", choices=["zip", "zinb"], default="zinb")
    p.add_argument("--constrained", action="store_true", help="share the stationary probability across conditions")
    p.add_argument("--iters", type=int, default=10000)
    p.add_argument("--burnin", type=int, default=5000)
    p.add_argument("--thin", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--priors", help="INI file with a [priors] section")
    p.add_argument("--checkpoint", help="write retained parameter draws here")
    p.add_argument("-o", "--output", required=True, help="posterior probabilities table")
    p.set_defaults(func=cmd_fit_mrf)

    p = common(sub.add_parser("fit-mix", help="fit the independent mixture model by EM"))
    p.add_argument("--counts", required=True)
    p.add_argument("--design")
    p.add_argument("--family", choices=["zip", "zinb", "nb"], default="zinb")
    p.add_argument("--tol", type=float, default=1e-6)
    p.add_argument("--max-iter", type=int, default=1000)
    p.add_argument("--bic", action="store_true", help="also compare NB-NB and ZINB-NB by BIC per column")
    p.add_argument("--bic-table", help="write the BIC comparison as TSV")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; EM is deterministic")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_fit_mix)

    p = common(sub.add_parser("call", help="call enriched regions at a target FDR"))
    p.add_argument("--posteriors", required=True)
    p.add_argument("--column", help="condition column (default: first)")
    p.add_argument("--fdr", type=float, default=0.05)
    p.add_argument("--bedgraph", help="also write the posterior track")
    p.add_argument("--compare", help="second posterior table; report overlap of the two call sets")
    p.add_argument("--compare-column")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; calling is deterministic")
    p.add_argument("-o", "--output", required=True, help="BED file of regions")
    p.set_defaults(func=cmd_call)

    p = common(sub.add_parser("diff", help="call differentially bound regions"))
    p.add_argument("--posteriors", required=True)
    p.add_argument("--cond1")
    p.add_argument("--cond2")
    p.add_argument("--fdr", type=float, default=0.05)
    p.add_argument("--bedgraph")
    p.add_argument("--seed", type=int, default=0, help="accepted for uniformity; calling is deterministic")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_diff)

    p = common(sub.add_parser("simulate", help="simulate counts from a scenario"))
    p.add_argument("--scenario", required=True, help="preset name or scenario config file")
    p.add_argument("--bins", type=int, help="override the number of bins")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--differential", action="store_true", help="two independent conditions")
    p.add_argument("--n-diff", type=float, default=100.0)
    p.add_argument("--truth", help="write the latent truth table here")
    p.add_argument("--config", help="write the scenario config here")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_simulate)

    p = common(sub.add_parser("bench", help="MRF versus mixture benchmark"))
    p.add_argument("--scenario", required=True)
    p.add_argument("--bins", type=int)
    p.add_argument("--reps", type=int, default=20)
    p.add_argument("--methods", nargs="+", default=["mrf", "mixture"], choices=["mrf", "mixture"])
    p.add_argument("--fdr", type=float, default=0.05)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--iters", type=int, default=3000)
    p.add_argument("--burnin", type=int, default=1000)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--table", help="write the summary table as TSV")
    p.add_argument("--text", action="store_true", help="print an aligned table to stderr")
    p.set_defaults(func=cmd_bench)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        _emit(args, args.func(args))
    except KeyboardInterrupt:
        print("error: interrupted", file=sys.stderr)
        return 130
    except Exception as exc:  # every failure becomes one parsable line
        msg = " ".join(str(exc).split())
        print(f"error: {type(exc).__name__}: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
