"""File formats: reads, count matrices, exclusion lists, calls, tracks, designs and checkpoints.

All interval coordinates are 0-based half-open. Tables are tab-separated
with a header row; CRLF line endings are accepted on input and written as LF.
"""

from __future__ import annotations

import configparser
import json
import logging
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .calling import RegionCall
from .data import Condition, CountMatrix, DimensionError, ExperimentDesign
from .inference.model import PosteriorSummary

log = logging.getLogger(__name__)


class FormatError(ValueError):
    """A malformed input file; the message names the file and line."""


def _lines(path):
    # universal newlines: CRLF and LF both end a line
    with open(path, encoding="utf-8", newline=None) as fh:
        for lineno, line in enumerate(fh, 1):
            yield lineno, line.rstrip("\n")


def _is_comment(line: str) -> bool:
    return not line.strip() or line.startswith(("#", "track", "browser"))


# -- reads and binning --------------------------------------------------------


def read_genome(path) -> dict[str, int]:
    """Chromosome sizes, two columns ``chrom length``, in file order."""
    out: dict[str, int] = {}
    for lineno, line in _lines(path):
        if _is_comment(line):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: expected 'chrom<TAB>length'")
        try:
            size = int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: chromosome length {parts[1]!r} is not an integer") from None
        if size < 1:
            raise FormatError(f"{path}:{lineno}: chromosome length must be positive")
        out[parts[0]] = size
    if not out:
        raise FormatError(f"{path}: no chromosomes")
    return out


def read_reads(path):
    """Stream ``(chrom, position)`` pairs from a two-column reads file."""
    for lineno, line in _lines(path):
        if _is_comment(line):
            continue
        parts = line.split("\t")
        if len(parts) < 2:
            raise FormatError(f"{path}:{lineno}: expected 'chrom<TAB>position'")
        try:
            yield parts[0], int(parts[1])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: position {parts[1]!r} is not an integer") from None


@dataclass
class BinnedReads:
    matrix: CountMatrix
    n_reads: int
    n_skipped: int


def genome_bins(genome: dict[str, int], width: int):
    """Bin coordinates covering every chromosome; the last bin is clipped to its end."""
    if width < 1:
        raise ValueError("bin width must be >= 1")
    chrom, start, end = [], [], []
    for name, size in genome.items():
        s = np.arange(0, size, width, dtype=np.int64)
        chrom.append(np.full(len(s), name, dtype=object))
        start.append(s)
        end.append(np.minimum(s + width, size))
    return np.concatenate(chrom), np.concatenate(start), np.concatenate(end)


def bin_reads(reads, width: int, genome: dict[str, int], label: str = "reads") -> BinnedReads:
    """Count reads whose first position falls in each bin (``floor(pos / width)``).

    Reads outside the genome are skipped with a warning each.
    """
    chrom, start, end = genome_bins(genome, width)
    offsets, pos = {}, 0
    for name, size in genome.items():
        offsets[name] = pos
        pos += -(-size // width)
    counts = np.zeros(len(chrom), dtype=np.int64)
    n = skipped = 0
    for c, p in reads:
        n += 1
        size = genome.get(c)
        if size is None or not 0 <= p < size:
            log.warning("skipping read %s:%d outside the genome", c, p)
            skipped += 1
            continue
        counts[offsets[c] + p // width] += 1
    return BinnedReads(CountMatrix(chrom, start, end, counts, [label]), n, skipped)


def bin_read_files(paths, width: int, genome: dict[str, int], labels=None) -> BinnedReads:
    """One count column per reads file."""
    labels = list(labels) if labels else [Path(p).stem for p in paths]
    if len(labels) != len(paths):
        raise DimensionError("one label per reads file is required")
    cols, n, skipped, first = [], 0, 0, None
    for path, lab in zip(paths, labels):
        res = bin_reads(read_reads(path), width, genome, lab)
        first = first or res.matrix
        cols.append(res.matrix.counts[:, 0])
        n += res.n_reads
        skipped += res.n_skipped
    m = CountMatrix(first.chrom, first.start, first.end, np.column_stack(cols), labels)
    return BinnedReads(m, n, skipped)


# -- exclusions ---------------------------------------------------------------


def read_bed(path) -> list[tuple[str, int, int]]:
    out = []
    for lineno, line in _lines(path):
        if _is_comment(line):
            continue
        parts = line.split("\t")
        if len(parts) < 3:
            raise FormatError(f"{path}:{lineno}: BED line needs chrom, start and end")
        try:
            a, b = int(parts[1]), int(parts[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: BED start/end must be integers") from None
        if a < 0 or b <= a:
            raise FormatError(f"{path}:{lineno}: BED interval must satisfy 0 <= start < end")
        out.append((parts[0], a, b))
    return out


def apply_exclusions(matrix: CountMatrix, intervals) -> CountMatrix:
    """Drop every bin overlapping an excluded interval; removed stretches split segments."""
    keep = np.ones(matrix.n_bins, dtype=bool)
    for c, a, b in intervals:
        keep &= ~((matrix.chrom == c) & (matrix.start < b) & (matrix.end > a))
    if keep.all():
        return matrix
    idx = np.flatnonzero(keep)
    seg = matrix.seg_id[idx]
    brk = np.zeros(len(idx), dtype=bool)
    brk[1:] = (np.diff(idx) != 1) | (seg[1:] != seg[:-1])
    out = matrix.subset(idx)
    out.seg_id = np.cumsum(brk).astype(np.int64)
    return out


# -- count and posterior tables -----------------------------------------------


def _read_table(path, parse, kind: str):
    rows = iter(_lines(path))
    try:
        _, header = next(rows)
    except StopIteration:
        raise FormatError(f"{path}: empty file") from None
    cols = header.split("\t")
    if cols[:3] != ["chrom", "start", "end"] or len(cols) < 4:
        raise FormatError(f"{path}:1: header must be 'chrom start end <labels...>'")
    labels = cols[3:]
    chrom, start, end, vals = [], [], [], []
    done: set[str] = set()
    for lineno, line in rows:
        if not line:
            continue
        parts = line.split("\t")
        if len(parts) != len(cols):
            raise FormatError(f"{path}:{lineno}: expected {len(cols)} fields, found {len(parts)}")
        try:
            s, e = int(parts[1]), int(parts[2])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: start/end must be integers") from None
        if e <= s or s < 0:
            raise FormatError(f"{path}:{lineno}: bin must satisfy 0 <= start < end")
        if chrom and chrom[-1] == parts[0] and s < end[-1]:
            raise FormatError(f"{path}:{lineno}: bins are not sorted or overlap")
        if chrom and chrom[-1] != parts[0]:
            if parts[0] in done:
                raise FormatError(f"{path}:{lineno}: chromosome {parts[0]} is not contiguous")
            done.add(chrom[-1])
        try:
            vals.append([parse(v) for v in parts[3:]])
        except ValueError:
            raise FormatError(f"{path}:{lineno}: {kind} values must be {parse.__name__}") from None
        chrom.append(parts[0])
        start.append(s)
        end.append(e)
    return labels, chrom, start, end, np.array(vals).reshape(len(chrom), len(labels))


def _count(v: str) -> int:
    n = int(v)
    if n < 0:
        raise ValueError
    return n


_count.__name__ = "non-negative integers"


def read_counts(path) -> CountMatrix:
    labels, chrom, start, end, vals = _read_table(path, _count, "count")
    return CountMatrix(np.array(chrom, dtype=object), start, end, vals.astype(np.int64), labels)


def _header(labels) -> str:
    return "\t".join(["chrom", "start", "end", *labels]) + "\n"


def write_counts(matrix: CountMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(matrix.labels))
        for c, s, e, row in zip(matrix.chrom, matrix.start, matrix.end, matrix.counts):
            fh.write(f"{c}\t{s}\t{e}\t" + "\t".join(map(str, row)) + "\n")


def _prob(v: str) -> float:
    x = float(v)
    if not 0.0 <= x <= 1.0:
        raise ValueError
    return x


_prob.__name__ = "probabilities in [0, 1]"


@dataclass
class PosteriorTrack:
    chrom: np.ndarray
    start: np.ndarray
    end: np.ndarray
    prob: np.ndarray  # (M, C)
    labels: list[str]

    def column(self, label: str) -> np.ndarray:
        if label not in self.labels:
            raise DimensionError(f"no posterior column named {label!r}")
        return self.prob[:, self.labels.index(label)]

    @property
    def seg_id(self) -> np.ndarray:
        from .data import default_segments

        return default_segments(self.chrom, self.start, self.end)


def write_posteriors(matrix: CountMatrix, prob: np.ndarray, labels, path) -> None:
    prob = np.asarray(prob).reshape(matrix.n_bins, -1)
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(_header(labels))
        for c, s, e, row in zip(matrix.chrom, matrix.start, matrix.end, prob):
            fh.write(f"{c}\t{s}\t{e}\t" + "\t".join(f"{v:.8g}" for v in row) + "\n")


def read_posteriors(path) -> PosteriorTrack:
    labels, chrom, start, end, vals = _read_table(path, _prob, "posterior")
    return PosteriorTrack(np.array(chrom, dtype=object), np.array(start, dtype=np.int64),
                          np.array(end, dtype=np.int64), vals.astype(float), labels)


# -- calls and tracks ---------------------------------------------------------


def write_bed(regions: list[RegionCall], path) -> None:
    """BED6-lite: chrom, start, end, name, score = round(1000 * mean posterior)."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for i, r in enumerate(regions, 1):
            fh.write(f"{r.chrom}\t{r.start}\t{r.end}\t{r.kind}_{i}\t{int(round(1000 * r.mean_posterior))}\n")


def write_bedgraph(chrom, start, end, values, path, name: str = "posterior") -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"track type=bedGraph name={name}\n")
        for c, s, e, v in zip(chrom, start, end, values):
            fh.write(f"{c}\t{s}\t{e}\t{v:.6g}\n")


# -- design, checkpoint, summaries --------------------------------------------


def read_design(path) -> ExperimentDesign:
    """Design file: optional ``[design] bin_width``, one ``[condition NAME]`` section each.

    A condition lists ``columns = a, b`` and optionally ``antibodies = x, y``.
    """
    cp = configparser.ConfigParser()
    try:
        with open(path, encoding="utf-8") as fh:
            cp.read_file(fh)
    except configparser.Error as exc:
        raise FormatError(f"{path}: {exc.message.splitlines()[0]}") from None
    split = lambda v: [x.strip() for x in v.split(",") if x.strip()]  # noqa: E731
    conds = []
    for sec in cp.sections():
        if sec.startswith("condition "):
            d = cp[sec]
            if "columns" not in d:
                raise FormatError(f"{path}: [{sec}] has no 'columns'")
            conds.append(Condition(sec.split(" ", 1)[1].strip(), split(d["columns"]), split(d.get("antibodies", ""))))
    if not conds:
        raise FormatError(f"{path}: no [condition NAME] sections")
    width = cp.getint("design", "bin_width", fallback=200)
    return ExperimentDesign(conds, width)


def write_checkpoint(summary: PosteriorSummary, path) -> None:
    """Retained parameter draws, one row per iteration."""
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("\t".join(["iteration", *summary.param_names]) + "\n")
        for it, row in zip(summary.iterations, summary.draws):
            fh.write(f"{int(it)}\t" + "\t".join(repr(float(v)) for v in row) + "\n")


def read_checkpoint(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    rows = list(_lines(path))
    if not rows:
        raise FormatError(f"{path}: empty file")
    names = rows[0][1].split("\t")
    if names[0] != "iteration":
        raise FormatError(f"{path}:1: first column must be 'iteration'")
    data = []
    for lineno, line in rows[1:]:
        parts = line.split("\t")
        if len(parts) != len(names):
            raise FormatError(f"{path}:{lineno}: expected {len(names)} fields, found {len(parts)}")
        data.append([float(v) for v in parts])
    arr = np.array(data).reshape(-1, len(names))
    return names[1:], arr[:, 0].astype(np.int64), arr[:, 1:]


def _jsonable(v):
    if isinstance(v, dict):
        return {str(k): _jsonable(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return None if math.isnan(v) or math.isinf(v) else v
    return v


def dump_summary(summary: dict) -> str:
    """Canonical JSON: sorted keys, NaN/inf written as null."""
    return json.dumps(_jsonable(summary), indent=2, sort_keys=True) + "\n"
