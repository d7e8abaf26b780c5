"""Worked examples, planted distributions and synthetic correctness matrices.

Random draws use ``numpy.random.default_rng(seed)``; the algorithm name is
exported as ``RNG_ALGORITHM`` so fixtures can be regenerated elsewhere from
seed + algorithm.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .closeness import ClosenessParams
from .corrdata import CorrectnessMatrix
from .events import CELL_NAMES, TripletDistribution

RNG_ALGORITHM = "numpy.random.Generator(PCG64)"

# correctness bits (model 1, model 2, model 3) for each cell, in CELL_NAMES order
CELL_BITS = {
    "p123": (1, 1, 1),
    "p12": (1, 1, 0),
    "p13": (1, 0, 1),
    "p23": (0, 1, 1),
    "p1": (1, 0, 0),
    "p2": (0, 1, 0),
    "p3": (0, 0, 1),
    "p_none": (0, 0, 0),
}

EXAMPLE2_WEDGE = ClosenessParams(0.31, 0.38, 0.005, 0.008)


@dataclass
class PlantedScenario:
    name: str
    P: TripletDistribution
    Q: TripletDistribution
    expected: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "P": self.P.as_dict(),
            "Q": self.Q.as_dict(),
            "expected": self.expected,
        }


def example1() -> PlantedScenario:
    """Ordered under both distributions, yet far from collinear."""
    P = TripletDistribution.from_cells(p123=0.6, p23=0.1, p3=0.1)
    Q = TripletDistribution.from_cells(p123=0.5, p23=0.4, p3=0.0)
    return PlantedScenario(
        "example1", P, Q,
        expected={
            "mu_p": [0.6, 0.7, 0.8],
            "mu_q": [0.5, 0.9, 0.9],
            "residual": 0.2,
            "ordered_p": True,
            "ordered_q": True,
        },
    )


def independent_triplet(mu1: float, mu2: float, mu3: float) -> TripletDistribution:
    """Cells of three models that err independently."""
    for m in (mu1, mu2, mu3):
        if not 0.0 <= m <= 1.0:
            raise ValueError(f"accuracy {m} outside [0, 1]")
    a, b, c = mu1, mu2, mu3
    return TripletDistribution(
        p123=a * b * c,
        p12=a * b * (1 - c),
        p13=a * (1 - b) * c,
        p23=(1 - a) * b * c,
        p1=a * (1 - b) * (1 - c),
        p2=(1 - a) * b * (1 - c),
        p3=(1 - a) * (1 - b) * c,
        p_none=(1 - a) * (1 - b) * (1 - c),
    )


def example2() -> PlantedScenario:
    """Independent errors under P and a wedge-close Q with a large residual."""
    P = independent_triplet(0.6, 0.7, 0.8)
    Q = TripletDistribution.from_cells(
        p123=0.336, p12=0.053, p13=0.2, p23=0.15, p1=0.057, p2=0.034, p3=0.14
    )
    return PlantedScenario(
        "example2", P, Q,
        expected={
            "mu_p": [0.6, 0.7, 0.8],
            "mu_q": [0.646, 0.573, 0.826],
            "residual": 0.163,
            "dominance": [0.18, 0.12, 0.14],
            "wedge": list(EXAMPLE2_WEDGE.as_tuple()),
            "wedge_violations": 0,
            "prop1_if_ordered": 0.0545,
        },
    )


def _matrix_from_outcomes(outcomes: np.ndarray, names: Sequence[str], label: str) -> CorrectnessMatrix:
    table = np.array([CELL_BITS[c] for c in CELL_NAMES], dtype=np.uint8)  # (8, 3)
    return CorrectnessMatrix.from_bits(table[outcomes].T, names, label)


def sample_matrix(
    t: TripletDistribution,
    n_examples: int,
    seed: int,
    model_names: Sequence[str] = ("f1", "f2", "f3"),
    label: str = "",
) -> CorrectnessMatrix:
    """i.i.d. draws of the eight correctness patterns of ``t``."""
    if n_examples < 1:
        raise ValueError("n_examples must be >= 1")
    probs = np.clip(np.array([getattr(t, c) for c in CELL_NAMES]), 0.0, None)
    probs /= probs.sum()
    rng = np.random.default_rng(seed)
    outcomes = rng.choice(len(CELL_NAMES), size=n_examples, p=probs)
    return _matrix_from_outcomes(outcomes, model_names, label)


def exact_matrix(
    t: TripletDistribution,
    n_examples: int,
    seed: int | None = None,
    model_names: Sequence[str] = ("f1", "f2", "f3"),
    label: str = "",
) -> CorrectnessMatrix:
    """Matrix whose empirical cells equal ``t`` rounded to multiples of 1/n.

    Counts use largest-remainder rounding so they sum to ``n_examples``;
    with a seed the example order is shuffled.
    """
    probs = np.array([getattr(t, c) for c in CELL_NAMES]) * n_examples
    counts = np.floor(probs + 1e-9).astype(int)
    short = n_examples - counts.sum()
    order = np.argsort(-(probs - counts), kind="stable")
    counts[order[:short]] += 1
    outcomes = np.repeat(np.arange(len(CELL_NAMES)), counts)
    if seed is not None:
        outcomes = np.random.default_rng(seed).permutation(outcomes)
    return _matrix_from_outcomes(outcomes, model_names, label)


def ordered_chain(
    accuracies: Sequence[float],
    n_examples: int,
    seed: int,
    model_names: Sequence[str] | None = None,
    label: str = "",
) -> CorrectnessMatrix:
    """Models with nested correct sets, so every dominance probability is 0."""
    acc = list(accuracies)
    if not acc:
        raise ValueError("need at least one accuracy")
    if any(not 0.0 <= a <= 1.0 for a in acc):
        raise ValueError("accuracies must lie in [0, 1]")
    if any(b < a for a, b in zip(acc, acc[1:])):
        raise ValueError("accuracies must be nondecreasing")
    counts = np.maximum.accumulate(np.rint(np.array(acc) * n_examples).astype(int))
    perm = np.random.default_rng(seed).permutation(n_examples)
    bits = np.zeros((len(acc), n_examples), dtype=np.uint8)
    for i, c in enumerate(counts):
        bits[i, perm[:c]] = 1
    if model_names is None:
        model_names = [f"m{i:02d}" for i in range(len(acc))]
    return CorrectnessMatrix.from_bits(bits, model_names, label)


# -- random oracles -----------------------------------------------------------


def random_triplet(rng: np.random.Generator) -> TripletDistribution:
    w = rng.dirichlet(np.ones(len(CELL_NAMES)))
    cells = dict(zip(CELL_NAMES[:-1], w[:-1].tolist()))
    return TripletDistribution.from_cells(**cells)


def random_ordered_triplet(rng: np.random.Generator) -> TripletDistribution:
    """Random P with p1 = p2 = p12 = p13 = 0 and distinct outer accuracies."""
    while True:
        w = rng.dirichlet(np.ones(4))
        P = TripletDistribution.from_cells(p123=w[0], p23=w[1], p3=w[2])
        if P.p3 + P.p23 > 1e-6:
            return P


def random_wedge_q(
    P: TripletDistribution, params: ClosenessParams, rng: np.random.Generator
) -> TripletDistribution:
    """Random Q whose six non-unanimous cells satisfy the wedge around ``P``."""
    while True:
        cells = {}
        for name in ("p12", "p13", "p23", "p1", "p2", "p3"):
            p = getattr(P, name)
            lo = max(0.0, float(params.lower(p)))
            hi = float(params.upper(p))
            cells[name] = rng.uniform(lo, hi)
        rest = 1.0 - math.fsum(cells.values())
        if rest >= 0:
            cells["p123"] = rng.uniform(0, rest)
            return TripletDistribution.from_cells(**cells)


def planted_pair(
    accuracies_p: Sequence[float],
    slope: float,
    intercept: float,
    n_examples: int,
    seed: int,
) -> tuple[CorrectnessMatrix, CorrectnessMatrix]:
    """Ordered chains on P and Q whose accuracies lie exactly on a planted line."""
    acc_q = [min(1.0, max(0.0, slope * a + intercept)) for a in accuracies_p]
    names = [f"m{i:02d}" for i in range(len(accuracies_p))]
    mp = ordered_chain(accuracies_p, n_examples, seed, names, "P")
    mq = ordered_chain(acc_q, n_examples, seed + 1, names, "Q")
    return mp, mq
