"""Count matrices and the experimental design that maps columns to conditions."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .chain import segments_from_ids


class DimensionError(ValueError):
    """Data and design disagree about shape or column names."""


@dataclass
class CountMatrix:
    """Tag counts per bin (rows) and experiment column.

    Bins are ordered; ``seg_id`` marks independent chain segments (a new id at
    every chromosome change or excluded gap). Coordinates are 0-based
    half-open.
    """

    chrom: np.ndarray
    start: np.ndarray
    end: np.ndarray
    counts: np.ndarray
    labels: list[str]
    seg_id: np.ndarray | None = None

    def __post_init__(self):
        self.chrom = np.asarray(self.chrom, dtype=object)
        self.start = np.asarray(self.start, dtype=np.int64)
        self.end = np.asarray(self.end, dtype=np.int64)
        self.counts = np.asarray(self.counts, dtype=np.int64)
        if self.counts.ndim == 1:
            self.counts = self.counts[:, None]
        m = len(self.chrom)
        if not (len(self.start) == len(self.end) == self.counts.shape[0] == m):
            raise DimensionError("bin coordinate vectors and count rows differ in length")
        if self.counts.shape[1] != len(self.labels):
            raise DimensionError(
                f"{self.counts.shape[1]} count columns but {len(self.labels)} labels"
            )
        if np.any(self.counts < 0):
            raise ValueError("counts must be non-negative")
        if self.seg_id is None:
            self.seg_id = default_segments(self.chrom, self.start, self.end)
        self.seg_id = np.asarray(self.seg_id, dtype=np.int64)

    @property
    def n_bins(self) -> int:
        return len(self.chrom)

    @property
    def segments(self) -> list[tuple[int, int]]:
        return segments_from_ids(self.seg_id)

    def column(self, label: str) -> np.ndarray:
        try:
            return self.counts[:, self.labels.index(label)]
        except ValueError:
            raise DimensionError(f"no count column named {label!r}") from None

    def subset(self, rows) -> "CountMatrix":
        rows = np.asarray(rows)
        return CountMatrix(
            self.chrom[rows],
            self.start[rows],
            self.end[rows],
            self.counts[rows],
            list(self.labels),
            self.seg_id[rows],
        )

    @classmethod
    def from_array(cls, counts, labels=None, width: int = 200, chrom: str = "chrS", segments=None):
        """Wrap a bare ``(M, ncol)`` array with synthetic contiguous coordinates."""
        counts = np.asarray(counts, dtype=np.int64)
        if counts.ndim == 1:
            counts = counts[:, None]
        m = counts.shape[0]
        labels = labels or [f"y{j}" for j in range(counts.shape[1])]
        start = np.arange(m, dtype=np.int64) * width
        seg_id = np.zeros(m, dtype=np.int64)
        for k, (a, b) in enumerate(segments or [(0, m)]):
            seg_id[a:b] = k
        return cls(np.full(m, chrom, dtype=object), start, start + width, counts, labels, seg_id)


def default_segments(chrom, start, end) -> np.ndarray:
    """New segment at every chromosome change or coordinate gap."""
    m = len(chrom)
    if m == 0:
        return np.zeros(0, dtype=np.int64)
    brk = np.zeros(m, dtype=bool)
    brk[1:] = (chrom[1:] != chrom[:-1]) | (start[1:] != end[:-1])
    return np.cumsum(brk).astype(np.int64)


@dataclass
class Condition:
    label: str
    columns: list[str]
    antibodies: list[str] = field(default_factory=list)

    def __post_init__(self):
        if not self.columns:
            raise DimensionError(f"condition {self.label!r} has no replicate columns")
        if not self.antibodies:
            self.antibodies = ["ab1"] * len(self.columns)
        if len(self.antibodies) != len(self.columns):
            raise DimensionError(f"condition {self.label!r}: antibody list does not match replicates")


@dataclass
class ExperimentDesign:
    """Which count columns are replicates of which condition.

    Antibody labels are carried along but every replicate of a condition
    shares one latent profile, so they are treated like replicate labels.
    """

    conditions: list[Condition]
    bin_width: int = 200

    def __post_init__(self):
        if self.bin_width < 1:
            raise ValueError("bin width must be >= 1")
        seen = set()
        for cond in self.conditions:
            for col in cond.columns:
                if col in seen:
                    raise DimensionError(f"column {col!r} mapped more than once")
                seen.add(col)

    @property
    def labels(self) -> list[str]:
        return [c.label for c in self.conditions]

    def column_indices(self, matrix: CountMatrix) -> list[list[int]]:
        missing = [col for c in self.conditions for col in c.columns if col not in matrix.labels]
        if missing:
            raise DimensionError(f"design column {missing[0]!r} not found in count matrix")
        mapped = {col for c in self.conditions for col in c.columns}
        extra = [lab for lab in matrix.labels if lab not in mapped]
        if extra:
            raise DimensionError(f"count column {extra[0]!r} is not mapped by the design")
        return [[matrix.labels.index(col) for col in c.columns] for c in self.conditions]

    @classmethod
    def single(cls, matrix: CountMatrix, label: str = "c1") -> "ExperimentDesign":
        """All columns of ``matrix`` as replicates of one condition."""
        return cls([Condition(label, list(matrix.labels))])

    @classmethod
    def per_column(cls, matrix: CountMatrix) -> "ExperimentDesign":
        return cls([Condition(lab, [lab]) for lab in matrix.labels])
