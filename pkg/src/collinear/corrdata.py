"""Correctness matrices: loading, validation, accuracies and alignment.

A correctness matrix holds, for every model, one bit per evaluation example
(1 = the model classified the example correctly).  Rows are packed with
``numpy.packbits`` so that intersections reduce to byte-wise AND plus a
popcount.
"""

from __future__ import annotations

import csv
import io
import logging
import os
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

logger = logging.getLogger(__name__)


class MatrixFormatError(ValueError):
    """Raised when a correctness CSV cannot be parsed."""


class MatrixValidationError(ValueError):
    """Raised when a parsed matrix violates a structural invariant."""


def popcount(packed: np.ndarray) -> int:
    """Number of set bits in a packed uint8 array."""
    return int(np.bitwise_count(packed).sum(dtype=np.int64))


@dataclass(frozen=True, eq=False)
class CorrectnessMatrix:
    """Per-model, per-example 0/1 correctness on one distribution.

    ``packed`` has shape ``(h, ceil(n_examples / 8))``; padding bits are zero.
    Instances are immutable and safe to share across workers.
    """

    distribution_label: str
    model_names: tuple[str, ...]
    n_examples: int
    packed: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        h = len(self.model_names)
        if h < 1:
            raise MatrixValidationError("matrix needs at least one model")
        if self.n_examples < 1:
            raise MatrixValidationError("matrix needs at least one example")
        if len(set(self.model_names)) != h:
            dups = sorted(m for m, c in Counter(self.model_names).items() if c > 1)
            raise MatrixValidationError(f"duplicate model names: {dups}")
        nbytes = (self.n_examples + 7) // 8
        if self.packed.shape != (h, nbytes) or self.packed.dtype != np.uint8:
            raise MatrixValidationError(
                f"packed rows must be uint8 of shape {(h, nbytes)}, got "
                f"{self.packed.dtype} {self.packed.shape}"
            )
        self.packed.setflags(write=False)

    @classmethod
    def from_bits(
        cls,
        bits: np.ndarray | Sequence[Sequence[int]],
        model_names: Sequence[str] | None = None,
        distribution_label: str = "",
    ) -> "CorrectnessMatrix":
        """Build from a dense ``(h, n_examples)`` array of 0/1 values."""
        arr = np.asarray(bits)
        if arr.ndim != 2:
            raise MatrixValidationError("bits must be a 2-D (models x examples) array")
        if not np.isin(arr, (0, 1)).all():
            raise MatrixValidationError("bits must contain only 0 and 1")
        h, n = arr.shape
        if model_names is None:
            model_names = [f"m{i}" for i in range(h)]
        if len(model_names) != h:
            raise MatrixValidationError(
                f"{len(model_names)} model names for {h} rows"
            )
        packed = np.packbits(arr.astype(np.uint8), axis=1)
        return cls(distribution_label, tuple(model_names), n, packed)

    @property
    def h(self) -> int:
        return len(self.model_names)

    def bits(self) -> np.ndarray:
        """Dense ``(h, n_examples)`` uint8 copy of the matrix."""
        return np.unpackbits(self.packed, axis=1, count=self.n_examples)

    def row(self, i: int) -> np.ndarray:
        self._check_index(i)
        return self.packed[i]

    def count(self, i: int) -> int:
        """Number of examples model ``i`` gets right."""
        return popcount(self.row(i))

    def index(self, name: str) -> int:
        try:
            return self.model_names.index(name)
        except ValueError:
            raise KeyError(f"model {name!r} not in matrix") from None

    def select(self, names: Sequence[str]) -> "CorrectnessMatrix":
        """Sub-matrix with the given models, in the given order."""
        idx = [self.index(n) for n in names]
        return CorrectnessMatrix(
            self.distribution_label, tuple(names), self.n_examples, self.packed[idx].copy()
        )

    def _check_index(self, i: int) -> None:
        if not (0 <= i < self.h):
            raise IndexError(f"model index {i} out of range for h={self.h}")


def accuracy(m: CorrectnessMatrix, i: int) -> float:
    """Empirical accuracy of model ``i``: integer count over n, one division."""
    return m.count(i) / m.n_examples


def accuracies(m: CorrectnessMatrix) -> np.ndarray:
    counts = np.bitwise_count(m.packed).sum(axis=1, dtype=np.int64)
    return counts / m.n_examples


def parse_matrix(text: str, distribution_label: str = "") -> CorrectnessMatrix:
    """Parse the CSV correctness format (rows = examples, columns = models)."""
    lines = [ln.rstrip() for ln in io.StringIO(text).read().splitlines()]
    while lines and not lines[-1]:
        lines.pop()
    if not lines:
        raise MatrixFormatError("empty file")
    reader = csv.reader(lines)
    header = [c.strip() for c in next(reader)]
    if len(header) < 2:
        raise MatrixFormatError("header must be `example_id,<model_1>,...`")
    names = header[1:]
    if any(not n for n in names):
        raise MatrixFormatError("empty model name in header")
    h = len(names)
    rows: list[list[int]] = []
    for line_no, cells in enumerate(reader, start=2):
        if not cells or all(not c.strip() for c in cells):
            raise MatrixFormatError(f"blank line {line_no} inside data")
        if len(cells) != h + 1:
            raise MatrixValidationError(
                f"ragged row at line {line_no}: expected {h + 1} cells, got {len(cells)}"
            )
        row = []
        for col, cell in enumerate(cells[1:], start=1):
            c = cell.strip()
            if c not in ("0", "1"):
                raise MatrixFormatError(
                    f"bad cell {c!r} at line {line_no}, column {col + 1} "
                    f"(model {names[col - 1]!r}); expected 0 or 1"
                )
            row.append(int(c))
        rows.append(row)
    if not rows:
        raise MatrixValidationError("matrix has no example rows")
    dense = np.asarray(rows, dtype=np.uint8).T
    return CorrectnessMatrix.from_bits(dense, names, distribution_label)


def load_matrix(path: str | os.PathLike, distribution_label: str | None = None) -> CorrectnessMatrix:
    with open(path, encoding="utf-8", newline="") as fh:
        text = fh.read()
    if distribution_label is None:
        distribution_label = os.path.splitext(os.path.basename(path))[0]
    return parse_matrix(text, distribution_label)


def format_matrix(m: CorrectnessMatrix, example_ids: Iterable[str] | None = None) -> str:
    dense = m.bits().T
    ids = list(example_ids) if example_ids is not None else [str(k) for k in range(m.n_examples)]
    out = io.StringIO()
    out.write("example_id," + ",".join(m.model_names) + "\n")
    for ex_id, row in zip(ids, dense):
        out.write(ex_id + "," + ",".join("1" if b else "0" for b in row) + "\n")
    return out.getvalue()


def save_matrix(m: CorrectnessMatrix, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(format_matrix(m))


@dataclass(frozen=True)
class AccuracyPairSet:
    """Aligned (mu_p, mu_q) accuracy pairs, sorted ascending by mu_p."""

    model_names: tuple[str, ...]
    mu_p: tuple[float, ...]
    mu_q: tuple[float, ...]
    missing: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        n = len(self.model_names)
        if n < 1 or len(self.mu_p) != n or len(self.mu_q) != n:
            raise MatrixValidationError("accuracy pair lists must share a length >= 1")
        if any(b < a for a, b in zip(self.mu_p, self.mu_p[1:])):
            raise MatrixValidationError("mu_p must be nondecreasing")
        for v in (*self.mu_p, *self.mu_q):
            if not 0.0 <= v <= 1.0:
                raise MatrixValidationError(f"accuracy {v} outside [0, 1]")

    @classmethod
    def from_lists(
        cls, model_names: Sequence[str], mu_p: Sequence[float], mu_q: Sequence[float]
    ) -> "AccuracyPairSet":
        """Sort arbitrary pairs by mu_p (ties by input position)."""
        order = sorted(range(len(mu_p)), key=lambda k: (mu_p[k], k))
        return cls(
            tuple(model_names[k] for k in order),
            tuple(float(mu_p[k]) for k in order),
            tuple(float(mu_q[k]) for k in order),
        )

    def __len__(self) -> int:
        return len(self.model_names)

    def points(self) -> list[tuple[float, float]]:
        return list(zip(self.mu_p, self.mu_q))


def common_models(mp: CorrectnessMatrix, mq: CorrectnessMatrix) -> tuple[list[str], list[str]]:
    """Models shared by both matrices (in P order) and models found in only one."""
    q_names = set(mq.model_names)
    shared = [n for n in mp.model_names if n in q_names]
    p_names = set(mp.model_names)
    missing = sorted((p_names ^ q_names))
    return shared, missing


def align(mp: CorrectnessMatrix, mq: CorrectnessMatrix) -> AccuracyPairSet:
    """Pair accuracies of models present in both matrices."""
    shared, missing = common_models(mp, mq)
    if not shared:
        raise MatrixValidationError("P and Q matrices share no model names")
    if missing:
        logger.warning("models present in only one matrix were dropped: %s", ", ".join(missing))
    ap = accuracies(mp.select(shared))
    aq = accuracies(mq.select(shared))
    pairs = AccuracyPairSet.from_lists(shared, ap.tolist(), aq.tolist())
    return AccuracyPairSet(pairs.model_names, pairs.mu_p, pairs.mu_q, tuple(missing))


def align_matrices(
    mp: CorrectnessMatrix, mq: CorrectnessMatrix
) -> tuple[CorrectnessMatrix, CorrectnessMatrix]:
    """Restrict both matrices to their shared models, ordered as in ``mp``."""
    shared, missing = common_models(mp, mq)
    if not shared:
        raise MatrixValidationError("P and Q matrices share no model names")
    if missing:
        logger.warning("models present in only one matrix were dropped: %s", ", ".join(missing))
    return mp.select(shared), mq.select(shared)
