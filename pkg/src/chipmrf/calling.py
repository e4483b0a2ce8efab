"""Posterior-probability thresholding under expected-FDR control, and region merging."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class FdrCall:
    called: np.ndarray  # boolean mask over bins
    threshold: float  # smallest called probability (nan when nothing is called)
    fdr: float  # expected FDR of the call set (0 when empty)
    n_called: int


@dataclass(frozen=True)
class RegionCall:
    chrom: str
    start: int
    end: int
    first_bin: int
    last_bin: int
    mean_posterior: float
    kind: str = "enriched"

    def __post_init__(self):
        if self.end <= self.start:
            raise ValueError("region end must exceed start")
        if not 0.0 <= self.mean_posterior <= 1.0:
            raise ValueError("mean posterior must lie in [0, 1]")

    @property
    def n_bins(self) -> int:
        return self.last_bin - self.first_bin + 1


def fdr_call(posteriors, alpha: float) -> FdrCall:
    """Call the largest top-ranked set whose mean of ``1 - p`` stays within ``alpha``.

    Bins with equal probability are called or rejected together.
    """
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie in (0, 1)")
    p = np.asarray(posteriors, dtype=float)
    if np.any((p < 0) | (p > 1)) or np.any(~np.isfinite(p)):
        raise ValueError("posterior probabilities must lie in [0, 1]")
    called = np.zeros(len(p), dtype=bool)
    if len(p) == 0:
        return FdrCall(called, float("nan"), 0.0, 0)
    order = np.argsort(-p, kind="stable")
    ps = p[order]
    running = np.cumsum(1.0 - ps) / np.arange(1, len(ps) + 1)
    # only prefixes ending at the last member of a tie group are admissible
    group_end = np.append(ps[1:] != ps[:-1], True)
    ok = np.flatnonzero(group_end & (running <= alpha + 1e-12))
    if len(ok) == 0:
        return FdrCall(called, float("nan"), 0.0, 0)
    d = int(ok[-1]) + 1
    called[order[:d]] = True
    return FdrCall(called, float(ps[d - 1]), float(running[d - 1]), d)


def differential_prob(p1, p2):
    """P(X1 != X2) for independent posteriors ``p1`` and ``p2``."""
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    out = (1.0 - p1) * p2 + p1 * (1.0 - p2)
    return float(out) if out.ndim == 0 else out


def call_differential(post1, post2, alpha: float) -> FdrCall:
    return fdr_call(differential_prob(post1, post2), alpha)


def merge_regions(called, chrom, start, end, seg_id=None, scores=None, kind: str = "enriched") -> list[RegionCall]:
    """Merge maximal runs of adjacent called bins, never across segments.

    ``called`` is a boolean mask (or index list) over bins; coordinates are
    per-bin arrays. ``scores`` (default all ones) supplies the per-bin
    posterior averaged into ``mean_posterior``.
    """
    n = len(chrom)
    mask = np.zeros(n, dtype=bool)
    called = np.asarray(called)
    if called.dtype == bool:
        mask[:] = called
    else:
        mask[called.astype(np.int64)] = True
    seg_id = np.zeros(n, dtype=np.int64) if seg_id is None else np.asarray(seg_id)
    scores = np.ones(n) if scores is None else np.asarray(scores, dtype=float)
    idx = np.flatnonzero(mask)
    if len(idx) == 0:
        return []
    brk = np.flatnonzero((np.diff(idx) != 1) | (seg_id[idx[1:]] != seg_id[idx[:-1]])) + 1
    regions = []
    for run in np.split(idx, brk):
        a, b = int(run[0]), int(run[-1])
        regions.append(
            RegionCall(
                str(chrom[a]),
                int(start[a]),
                int(end[b]),
                a,
                b,
                float(np.clip(scores[a : b + 1].mean(), 0.0, 1.0)),
                kind,
            )
        )
    return regions


def region_overlap(a: list[RegionCall], b: list[RegionCall]) -> dict[str, int]:
    """Overlap of two call sets, counted at region level and at bin level."""
    bins_a = {(r.chrom, i) for r in a for i in range(r.first_bin, r.last_bin + 1)}
    bins_b = {(r.chrom, i) for r in b for i in range(r.first_bin, r.last_bin + 1)}
    hit = sum(1 for r in a if any((r.chrom, i) in bins_b for i in range(r.first_bin, r.last_bin + 1)))
    return {"regions": hit, "bins": len(bins_a & bins_b)}
