"""Regenerate the small example files in tests/data.

Every file is produced deterministically (fixed seeds), mostly by running
the command-line interface itself, so the fixtures double as format examples.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from chipmrf.cli import main
from chipmrf.simeval import get_scenario, scenario_to_config

DATA = Path(__file__).resolve().parents[1] / "tests" / "data"


def run(*argv: str) -> None:
    if main(list(argv)) != 0:
        sys.exit(f"fixture command failed: {' '.join(argv)}")


def write(name: str, text: str) -> Path:
    path = DATA / name
    path.write_text(text, encoding="utf-8")
    return path


def main_() -> None:
    DATA.mkdir(parents=True, exist_ok=True)
    rng = np.random.default_rng(20100)

    write("genome.tsv", "chr1\t5000\nchr2\t3000\n")
    for name, hot in (("reads_a.tsv", 1200), ("reads_b.tsv", 3400)):
        lines = ["# chrom\tposition"]
        for _ in range(150):
            c = "chr1" if rng.random() < 0.6 else "chr2"
            size = 5000 if c == "chr1" else 3000
            pos = int(rng.integers(0, size)) if rng.random() < 0.7 else int(rng.integers(hot, hot + 400)) % size
            lines.append(f"{c}\t{pos}")
        lines += ["chr1\t5000", "chrM\t10"]  # both outside the genome
        write(name, "\n".join(lines) + "\n")
    write("exclude.bed", "track name=blacklist\nchr1\t1000\t1450\tsatellite\nchr2\t2950\t3000\n")

    write("design.ini", "[design]\nbin_width = 200\n\n[condition c1]\ncolumns = c1.rep1, c1.rep2\n"
          "antibodies = ab1, ab1\n\n[condition c2]\ncolumns = c2.rep1, c2.rep2\nantibodies = ab1, ab1\n")
    write("design_bad.ini", "[condition c1]\ncolumns = c1.rep1, c1.rep9\n")
    write("priors.ini", "[priors]\npi_a = 1\npi_b = 1\nq0_a = 1\nq0_b = 1\nq1_a = 1\nq1_b = 1\n"
          "mu_shape = 0.01\nmu_rate = 0.01\nphi_shape = 0.01\nphi_rate = 0.01\nstep = 0.2\n")
    write("scenario5.cfg", scenario_to_config(get_scenario("scenario5-less")))

    d = str(DATA)
    run("bin", "--reads", f"{d}/reads_a.tsv", f"{d}/reads_b.tsv", "--labels", "a", "b", "--genome",
        f"{d}/genome.tsv", "--exclude", f"{d}/exclude.bed", "-o", f"{d}/counts_binned.tsv", "--summary", "/dev/null")
    run("simulate", "--scenario", "scenario5-less", "--differential", "--bins", "2000", "--seed", "3",
        "-o", f"{d}/counts_diff.tsv", "--truth", f"{d}/truth_diff.tsv", "--summary", "/dev/null")
    run("simulate", "--scenario", "scenario1-more", "--seed", "1", "-o", f"{d}/counts_scenario1.tsv",
        "--truth", f"{d}/truth_scenario1.tsv", "--summary", "/dev/null")
    run("fit-mrf", "--counts", f"{d}/counts_scenario1.tsv", "--iters", "3000", "--burnin", "1000", "--seed", "1",
        "-o", f"{d}/posteriors_scenario1.tsv", "--summary", "/dev/null")
    run("fit-mrf", "--counts", f"{d}/counts_diff.tsv", "--design", f"{d}/design.ini", "--iters", "400",
        "--burnin", "200", "--seed", "2", "--checkpoint", f"{d}/checkpoint.tsv", "-o", f"{d}/posteriors_diff.tsv",
        "--summary", "/dev/null")
    run("call", "--posteriors", f"{d}/posteriors_scenario1.tsv", "--fdr", "0.05", "-o", f"{d}/calls.bed",
        "--bedgraph", f"{d}/posterior.bedgraph", "--summary", "/dev/null")


if __name__ == "__main__":
    main_()
