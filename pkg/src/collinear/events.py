"""Pairwise dominance, similarity and triplet-event probabilities.

Everything here is computed from integer counts over the packed correctness
rows; the only floating step is the final division by ``n_examples``.  That
keeps results independent of evaluation order and worker count.

Cell naming for a model triple (f1, f2, f3) follows the "set of correct
models" convention: ``p12`` is the probability that f1 and f2 are correct
while f3 is wrong, ``p_none`` that all three are wrong.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
import math
import warnings
from dataclasses import asdict, dataclass
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from ._parallel import ordered_map
from .corrdata import CorrectnessMatrix, MatrixValidationError, popcount

logger = logging.getLogger(__name__)

CELL_NAMES = ("p123", "p12", "p13", "p23", "p1", "p2", "p3", "p_none")

# Sign patterns (model i, j, k) for the six non-unanimous events, in
# lexicographic (ASCII) order; '+' = correct, '-' = wrong.
PATTERNS = ("++-", "+-+", "+--", "-++", "-+-", "--+")
PATTERN_CELL = {
    "+++": "p123",
    "++-": "p12",
    "+-+": "p13",
    "-++": "p23",
    "+--": "p1",
    "-+-": "p2",
    "--+": "p3",
    "---": "p_none",
}


@dataclass(frozen=True)
class TripletDistribution:
    """Joint correctness probabilities of three models."""

    p123: float
    p12: float
    p13: float
    p23: float
    p1: float
    p2: float
    p3: float
    p_none: float

    def __post_init__(self) -> None:
        for name in CELL_NAMES:
            v = getattr(self, name)
            if not math.isfinite(v) or v < -1e-12:
                raise ValueError(f"{name} = {v} is not a probability")
        total = sum(getattr(self, n) for n in CELL_NAMES)
        if abs(total - 1.0) > 1e-12:
            raise ValueError(f"cells sum to {total!r}, not 1")

    @classmethod
    def from_cells(cls, **cells: float) -> "TripletDistribution":
        """Build from any subset of the seven non-``p_none`` cells (rest zero).

        ``p_none`` is filled in as the remaining mass.
        """
        unknown = set(cells) - set(CELL_NAMES[:-1])
        if unknown:
            raise TypeError(f"unknown cells: {sorted(unknown)}")
        vals = {n: float(cells.get(n, 0.0)) for n in CELL_NAMES[:-1]}
        vals["p_none"] = 1.0 - math.fsum(vals.values())
        if vals["p_none"] < 0 and vals["p_none"] > -1e-12:
            vals["p_none"] = 0.0
        return cls(**vals)

    def cell(self, pattern: str) -> float:
        return getattr(self, PATTERN_CELL[pattern])

    def as_dict(self) -> dict[str, float]:
        return asdict(self)

    @property
    def accuracies(self) -> tuple[float, float, float]:
        mu1 = self.p1 + self.p12 + self.p13 + self.p123
        mu2 = self.p2 + self.p12 + self.p23 + self.p123
        mu3 = self.p3 + self.p13 + self.p23 + self.p123
        return mu1, mu2, mu3

    @property
    def dominances(self) -> tuple[float, float, float]:
        """P(f1 right, f2 wrong), P(f1 right, f3 wrong), P(f2 right, f3 wrong)."""
        return self.p1 + self.p13, self.p1 + self.p12, self.p2 + self.p12

    def is_ordered(self, tol: float = 0.0) -> bool:
        return max(self.p1, self.p2, self.p12, self.p13) <= tol


class TripletPoint(NamedTuple):
    i: int
    j: int
    k: int
    pattern: str
    p: float
    q: float


@dataclass
class PointArray:
    """Columnar batch of triplet points; ``pattern`` holds indices into PATTERNS."""

    i: np.ndarray
    j: np.ndarray
    k: np.ndarray
    pattern: np.ndarray
    p: np.ndarray
    q: np.ndarray

    def __len__(self) -> int:
        return len(self.p)

    def __iter__(self) -> Iterator[TripletPoint]:
        for i, j, k, pat, p, q in zip(
            self.i.tolist(), self.j.tolist(), self.k.tolist(),
            self.pattern.tolist(), self.p.tolist(), self.q.tolist(),
        ):
            yield TripletPoint(i, j, k, PATTERNS[pat], p, q)

    @classmethod
    def empty(cls) -> "PointArray":
        z = np.zeros(0, dtype=np.int64)
        return cls(z, z, z, z, np.zeros(0), np.zeros(0))

    @classmethod
    def concat(cls, blocks: Iterable["PointArray"]) -> "PointArray":
        blocks = list(blocks)
        if not blocks:
            return cls.empty()
        return cls(*(np.concatenate([getattr(b, f) for b in blocks])
                     for f in ("i", "j", "k", "pattern", "p", "q")))

    @classmethod
    def from_points(cls, points: Iterable[TripletPoint]) -> "PointArray":
        pts = list(points)
        if not pts:
            return cls.empty()
        idx = {pat: n for n, pat in enumerate(PATTERNS)}
        return cls(
            np.array([t.i for t in pts], dtype=np.int64),
            np.array([t.j for t in pts], dtype=np.int64),
            np.array([t.k for t in pts], dtype=np.int64),
            np.array([idx[t.pattern] for t in pts], dtype=np.int64),
            np.array([t.p for t in pts], dtype=float),
            np.array([t.q for t in pts], dtype=float),
        )


def as_point_array(points) -> PointArray:
    """Normalize a point stream (TripletPoints or PointArray blocks) to one batch."""
    if isinstance(points, PointArray):
        return points
    blocks: list[PointArray] = []
    loose: list[TripletPoint] = []
    for item in points:
        if isinstance(item, PointArray):
            if loose:
                blocks.append(PointArray.from_points(loose))
                loose = []
            blocks.append(item)
        else:
            loose.append(TripletPoint(*item))
    if loose:
        blocks.append(PointArray.from_points(loose))
    return PointArray.concat(blocks)


# -- pairwise quantities -------------------------------------------------------


def pair_counts(m: CorrectnessMatrix, i: int, j: int) -> tuple[int, int, int, int]:
    """Integer counts (both right, only i right, only j right, both wrong)."""
    a, b = m.row(i), m.row(j)
    both = popcount(a & b)
    only_i = popcount(a) - both
    only_j = popcount(b) - both
    return both, only_i, only_j, m.n_examples - both - only_i - only_j


def dominance_probability(m: CorrectnessMatrix, i: int, j: int) -> float:
    """P(model i right and model j wrong), with i the less accurate model.

    If ``i`` is more accurate than ``j`` the pair is swapped (with a warning).
    ``i == j`` is degenerate and returns 0.
    """
    m._check_index(i)
    m._check_index(j)
    if i == j:
        warnings.warn(f"degenerate dominance pair ({i}, {i}); returning 0", stacklevel=2)
        return 0.0
    if m.count(i) > m.count(j):
        warnings.warn(
            f"model {i} is more accurate than model {j}; swapping the pair", stacklevel=2
        )
        i, j = j, i
    _, only_i, _, _ = pair_counts(m, i, j)
    return only_i / m.n_examples


def similarity(m: CorrectnessMatrix, i: int, j: int) -> float:
    """Fraction of examples on which models i and j are both right or both wrong."""
    m._check_index(i)
    m._check_index(j)
    disagree = popcount(m.row(i) ^ m.row(j))
    return (m.n_examples - disagree) / m.n_examples


@dataclass(frozen=True)
class DominanceEntry:
    lo: int
    hi: int
    lo_name: str
    hi_name: str
    dominance: float
    gap: float
    similarity: float


@dataclass(frozen=True)
class DominanceReport:
    entries: tuple[DominanceEntry, ...]
    zeta_max: float
    threshold: float
    fraction_below: float

    def to_dict(self) -> dict:
        return {
            "n_pairs": len(self.entries),
            "zeta_max": self.zeta_max,
            "threshold": self.threshold,
            "fraction_below": self.fraction_below,
            "entries": [asdict(e) for e in self.entries],
        }


def _dense(m: CorrectnessMatrix) -> np.ndarray:
    return m.bits().astype(np.float64)


def dominance_table(m: CorrectnessMatrix, threshold: float = 0.05) -> DominanceReport:
    """Dominance probability for every pair, oriented (less accurate, more accurate)."""
    if m.h < 2:
        raise MatrixValidationError("dominance table needs at least two models")
    # float64 matmul of 0/1 rows is exact for n < 2**53
    both = _pair_matrix(_dense(m))
    counts = np.diag(both).copy()
    n = m.n_examples
    entries = []
    for a, b in itertools.combinations(range(m.h), 2):
        lo, hi = (a, b) if counts[a] <= counts[b] else (b, a)
        only_lo = counts[lo] - both[lo, hi]
        gap_count = counts[hi] - counts[lo]
        entries.append(
            DominanceEntry(
                lo, hi, m.model_names[lo], m.model_names[hi],
                only_lo / n, gap_count / n, (n - gap_count - 2 * only_lo) / n,
            )
        )
    doms = [e.dominance for e in entries]
    below = sum(d < threshold for d in doms) / len(doms)
    return DominanceReport(tuple(entries), max(doms), threshold, below)


# -- triplets ------------------------------------------------------------------


def triplet_counts(m: CorrectnessMatrix, i: int, j: int, k: int) -> dict[str, int]:
    """Integer counts of the eight correctness patterns of models (i, j, k)."""
    if len({i, j, k}) != 3:
        raise ValueError(f"triplet indices must be distinct, got {(i, j, k)}")
    a, b, c = m.row(i), m.row(j), m.row(k)
    ab = a & b
    n123 = popcount(ab & c)
    n12 = popcount(ab & ~c)
    n13 = popcount(a & ~b & c)
    n23 = popcount(~a & b & c)
    n1 = popcount(a & ~b & ~c)
    # padding bits are zero in a, b, c so the patterns above never count them
    n2 = popcount(~a & b & ~c)
    n3 = popcount(~a & ~b & c)
    none = m.n_examples - (n123 + n12 + n13 + n23 + n1 + n2 + n3)
    return dict(p123=n123, p12=n12, p13=n13, p23=n23, p1=n1, p2=n2, p3=n3, p_none=none)


def triplet_events(m: CorrectnessMatrix, i: int, j: int, k: int) -> TripletDistribution:
    counts = triplet_counts(m, i, j, k)
    n = m.n_examples
    return TripletDistribution(**{name: c / n for name, c in counts.items()})


def _pair_matrix(x: np.ndarray) -> np.ndarray:
    return np.rint(x @ x.T).astype(np.int64)


def _triplet_pattern_counts(
    x: np.ndarray, both: np.ndarray, i: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Counts of the six patterns for all (i, j, k) with i < j < k.

    ``both`` is the pairwise co-correct count matrix of ``x``.  Returns
    (j, k, counts) with counts of shape (n_pairs, 6) in PATTERNS order.
    """
    h = x.shape[0]
    tri = np.rint((x * x[i]) @ x.T).astype(np.int64)
    jj, kk = np.triu_indices(h, k=1)
    keep = jj > i
    jj, kk = jj[keep], kk[keep]
    single = np.diag(both)
    n_ijk = tri[jj, kk]
    n_ij = both[i, jj]
    n_ik = both[i, kk]
    n_jk = both[jj, kk]
    counts = np.stack(
        [
            n_ij - n_ijk,                                   # ++-
            n_ik - n_ijk,                                   # +-+
            single[i] - n_ij - n_ik + n_ijk,                # +--
            n_jk - n_ijk,                                   # -++
            single[jj] - n_ij - n_jk + n_ijk,               # -+-
            single[kk] - n_ik - n_jk + n_ijk,               # --+
        ],
        axis=1,
    )
    return jj, kk, counts


def _check_aligned(mp: CorrectnessMatrix, mq: CorrectnessMatrix) -> CorrectnessMatrix:
    if set(mp.model_names) != set(mq.model_names):
        raise MatrixValidationError(
            "P and Q matrices must cover the same models; align them first"
        )
    if mp.h < 3:
        raise MatrixValidationError(f"triplet events need h >= 3 models, got {mp.h}")
    if mq.model_names != mp.model_names:
        mq = mq.select(mp.model_names)
    return mq


def iter_point_blocks(mp: CorrectnessMatrix, mq: CorrectnessMatrix) -> Iterator[PointArray]:
    """One PointArray per leading model index i, in increasing i.

    Within a block points are ordered by (j, k, pattern); concatenating the
    blocks gives the lexicographic (i, j, k, pattern) order.
    """
    mq = _check_aligned(mp, mq)
    xp, xq = _dense(mp), _dense(mq)
    bp, bq = _pair_matrix(xp), _pair_matrix(xq)
    n_p, n_q = mp.n_examples, mq.n_examples

    def block(i: int) -> PointArray:
        jj, kk, cp = _triplet_pattern_counts(xp, bp, i)
        _, _, cq = _triplet_pattern_counts(xq, bq, i)
        npairs = len(jj)
        return PointArray(
            np.full(npairs * 6, i, dtype=np.int64),
            np.repeat(jj, 6),
            np.repeat(kk, 6),
            np.tile(np.arange(6), npairs),
            (cp / n_p).ravel(),
            (cq / n_q).ravel(),
        )

    yield from ordered_map(block, range(mp.h - 2))


def enumerate_triplet_points(mp: CorrectnessMatrix, mq: CorrectnessMatrix) -> Iterator[TripletPoint]:
    """Stream (i, j, k, pattern, P(A), Q(A)) for all 6 * C(h, 3) events."""
    for blk in iter_point_blocks(mp, mq):
        yield from blk


def n_triplet_points(h: int) -> int:
    return 6 * math.comb(h, 3)


def points_to_csv(points: Iterable[TripletPoint]) -> str:
    out = io.StringIO()
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["i", "j", "k", "pattern", "p", "q"])
    for t in points:
        w.writerow([t.i, t.j, t.k, t.pattern, repr(float(t.p)), repr(float(t.q))])
    return out.getvalue()
