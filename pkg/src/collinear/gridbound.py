"""Grid search for the worst middle-model residual when dominance is small.

The search covers every triplet distribution P whose pairwise dominance
probabilities are at most ``zeta`` and whose accuracies are fixed, and every
Q whose six non-unanimous cells sit inside the closeness wedge around P.

P side: the four dominance cells p1, p2, p12, p13 are gridded with step
``p_grid_step`` starting at 0; p23 and p3 follow from the two accuracy-gap
equalities and p123 from the first accuracy, so those hold exactly.

Q side: each of the six cells takes ``q_grid_points`` equally spaced values
across its wedge interval.  The residual is linear in the Q cells (the
slope term only depends on the fixed accuracies), so the maximum over the
product grid splits into per-cell maxima; rows where that separable optimum
would need more than unit mass fall back to explicit enumeration.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from ._parallel import ordered_map, worker_count
from .bounds import residual_from_triplets
from .closeness import ClosenessParams
from .events import TripletDistribution

# Q cells in the order used throughout this module.
Q_CELLS = ("p1", "p2", "p3", "p12", "p13", "p23")

FEAS_TOL = 1e-12


class InfeasibleRegionError(ValueError):
    """No P-grid point satisfies the dominance and accuracy constraints."""


@dataclass(frozen=True)
class GridSearchConfig:
    zeta: float
    mu: tuple[float, float, float]
    params: ClosenessParams
    p_grid_step: float = 0.01
    q_grid_points: int = 5

    def __post_init__(self) -> None:
        if not (math.isfinite(self.zeta) and self.zeta >= 0):
            raise ValueError(f"zeta must be >= 0, got {self.zeta}")
        if not self.p_grid_step > 0:
            raise ValueError("p_grid_step must be positive")
        if self.q_grid_points < 2:
            raise ValueError("q_grid_points must be at least 2")
        mu1, mu2, mu3 = self.mu
        if not all(0.0 <= m <= 1.0 for m in self.mu):
            raise ValueError(f"accuracies must lie in [0, 1], got {self.mu}")
        if not mu1 <= mu2 <= mu3:
            raise ValueError(f"accuracies must be nondecreasing, got {self.mu}")
        if mu1 == mu3:
            raise ValueError("outer accuracies coincide; the residual line is undefined")


@dataclass(frozen=True)
class GridResult:
    config: GridSearchConfig
    max_value: float
    certified_upper: float
    witness_p: TripletDistribution
    witness_q: TripletDistribution
    n_p_points: int

    @property
    def halved(self) -> float:
        return self.max_value / 2

    def to_dict(self) -> dict:
        cfg = self.config
        return {
            "zeta": cfg.zeta,
            "mu": list(cfg.mu),
            "params": cfg.params.to_dict(),
            "p_grid_step": cfg.p_grid_step,
            "q_grid_points": cfg.q_grid_points,
            "max": self.max_value,
            "halved": self.halved,
            "certified_upper": self.certified_upper,
            "n_p_points": self.n_p_points,
            "witness": {"P": self.witness_p.as_dict(), "Q": self.witness_q.as_dict()},
        }


def _p_grid(cfg: GridSearchConfig) -> dict[str, np.ndarray]:
    """All feasible P points as column arrays (lexicographic in p1, p2, p12, p13)."""
    mu1, mu2, mu3 = cfg.mu
    step, zeta = cfg.p_grid_step, cfg.zeta
    kmax = int(math.floor(zeta / step + 1e-9))
    vals = np.arange(kmax + 1) * step
    p1, p2, p12, p13 = (a.ravel() for a in np.meshgrid(vals, vals, vals, vals, indexing="ij"))
    keep = (
        (p1 + p12 <= zeta + FEAS_TOL)
        & (p1 + p13 <= zeta + FEAS_TOL)
        & (p2 + p12 <= zeta + FEAS_TOL)
    )
    p1, p2, p12, p13 = p1[keep], p2[keep], p12[keep], p13[keep]
    p23 = (mu2 - mu1) + p1 + p13 - p2
    p3 = (mu3 - mu2) + p2 + p12 - p13
    p123 = mu1 - p1 - p12 - p13
    p_none = 1.0 - (p123 + p1 + p2 + p3 + p12 + p13 + p23)
    ok = (p23 >= -FEAS_TOL) & (p3 >= -FEAS_TOL) & (p123 >= -FEAS_TOL) & (p_none >= -FEAS_TOL)
    cols = dict(p1=p1, p2=p2, p3=p3, p12=p12, p13=p13, p23=p23, p123=p123, p_none=p_none)
    return {k: np.clip(v[ok], 0.0, None) for k, v in cols.items()}


def _coefficients(P: dict[str, np.ndarray]) -> np.ndarray:
    """Per-row coefficients of the residual (before |.|) on Q_CELLS."""
    a = (P["p2"] + P["p23"] - P["p1"] - P["p13"]) / (P["p3"] + P["p23"] - P["p1"] - P["p12"])
    one = np.ones_like(a)
    return np.stack([1 - a, -one, a, -a, one, a - 1], axis=1)


def _q_levels(P: dict[str, np.ndarray], params: ClosenessParams, g: int) -> np.ndarray:
    """Q grid values, shape (rows, 6 cells, g)."""
    p = np.stack([P[c] for c in Q_CELLS], axis=1)
    lo = np.maximum(0.0, params.lower(p))
    hi = params.upper(p)
    t = np.arange(g) / (g - 1)
    return lo[..., None] + (hi - lo)[..., None] * t


def _brute_force_row(coef: np.ndarray, levels: np.ndarray) -> tuple[float, np.ndarray]:
    """Exhaustive product-grid search for one P row, enforcing unit total mass."""
    best, best_q = -math.inf, None
    for idx in itertools.product(range(levels.shape[1]), repeat=6):
        q = levels[np.arange(6), idx]
        if q.sum() > 1.0 + FEAS_TOL:
            continue
        v = abs(float(coef @ q))
        if v > best:
            best, best_q = v, q
    return best, best_q


def _search_chunk(args):
    P, params, g, offset = args
    coef = _coefficients(P)
    levels = _q_levels(P, params, g)
    contrib = coef[..., None] * levels
    up_idx = contrib.argmax(axis=2)
    dn_idx = contrib.argmin(axis=2)
    up = np.take_along_axis(contrib, up_idx[..., None], axis=2)[..., 0].sum(axis=1)
    dn = np.take_along_axis(contrib, dn_idx[..., None], axis=2)[..., 0].sum(axis=1)
    use_up = up >= -dn
    value = np.where(use_up, up, -dn)
    pick = np.where(use_up[:, None], up_idx, dn_idx)
    q = np.take_along_axis(levels, pick[..., None], axis=2)[..., 0]
    brute = q.sum(axis=1) > 1.0 + FEAS_TOL
    for r in np.flatnonzero(brute):
        value[r], q[r] = _brute_force_row(coef[r], levels[r])
    q_step = np.where(brute, (np.abs(coef) * (levels[..., -1] - levels[..., 0])).sum(axis=1) / (g - 1), 0.0)
    r = int(np.argmax(value))
    return float(value[r]), offset + r, q[r], float(q_step.max(initial=0.0))


def _lipschitz_slack(cfg: GridSearchConfig) -> float:
    """step * (bound on the sum of |partial derivatives| over the gridded cells)."""
    if cfg.zeta == 0:
        return 0.0
    mu1, mu2, mu3 = cfg.mu
    a = (mu2 - mu1) / (mu3 - mu1)
    prm = cfg.params
    worst_delta2 = prm.delta2 if prm.segment2 is None else max(prm.delta2, prm.segment2.delta2)
    s = max(1 + worst_delta2, abs(1 - prm.delta1))
    c = {"p1": abs(1 - a), "p2": 1.0, "p3": abs(a), "p12": abs(a), "p13": 1.0, "p23": abs(a - 1)}
    # each gridded cell moves itself and the solved cells p23 / p3
    grad = (
        c["p1"] + c["p23"]                 # p1 -> p1, p23
        + c["p2"] + c["p23"] + c["p3"]     # p2 -> p2, p23, p3
        + c["p12"] + c["p3"]               # p12 -> p12, p3
        + c["p13"] + c["p23"] + c["p3"]    # p13 -> p13, p23, p3
    )
    return cfg.p_grid_step * s * grad


def _witness(P: dict[str, np.ndarray], row: int, q: np.ndarray) -> tuple[TripletDistribution, TripletDistribution]:
    wp = TripletDistribution(**{k: float(P[k][row]) for k in
                                ("p123", "p12", "p13", "p23", "p1", "p2", "p3", "p_none")})
    qc = dict(zip(Q_CELLS, (float(v) for v in q)))
    slack = max(0.0, 1.0 - math.fsum(qc.values()))
    q123 = min(slack, wp.p123)
    wq = TripletDistribution(p123=q123, p_none=slack - q123, **qc)
    return wp, wq


def max_residual_grid(cfg: GridSearchConfig) -> GridResult:
    """Largest middle-model residual over the constrained P and Q grids."""
    P = _p_grid(cfg)
    n = len(P["p1"])
    if n == 0:
        raise InfeasibleRegionError(
            f"no P-grid point satisfies zeta={cfg.zeta} with accuracies {cfg.mu} "
            f"at step {cfg.p_grid_step}"
        )
    n_chunks = min(worker_count(), max(1, n // 2048))
    bounds = np.linspace(0, n, n_chunks + 1).astype(int)
    chunks = [
        ({k: v[a:b] for k, v in P.items()}, cfg.params, cfg.q_grid_points, a)
        for a, b in zip(bounds[:-1], bounds[1:])
    ]
    best = None
    q_slack = 0.0
    for value, row, q, qs in ordered_map(_search_chunk, chunks):
        q_slack = max(q_slack, qs)
        # strict '>' keeps the earliest row on ties, matching grid order
        if best is None or value > best[0]:
            best = (value, row, q)
    value, row, q = best
    wp, wq = _witness(P, row, q)
    return GridResult(
        cfg, value, value + _lipschitz_slack(cfg) + q_slack, wp, wq, n
    )


def halved_bound(cfg: GridSearchConfig) -> float:
    """Residual guaranteed for all three models after shifting the line halfway."""
    return max_residual_grid(cfg).max_value / 2


def validate_witness(result: GridResult, tol: float = 1e-9) -> list[str]:
    """Re-check every constraint on the returned witness; returns problems found."""
    cfg, P, Q = result.config, result.witness_p, result.witness_q
    problems = []
    zeta = cfg.zeta
    if P.p1 + P.p12 > zeta + tol:
        problems.append("p1 + p12 exceeds zeta")
    if P.p1 + P.p13 > zeta + tol:
        problems.append("p1 + p13 exceeds zeta")
    if P.p2 + P.p12 > zeta + tol:
        problems.append("p2 + p12 exceeds zeta")
    for got, want, name in zip(P.accuracies, cfg.mu, ("mu1", "mu2", "mu3")):
        if abs(got - want) > tol:
            problems.append(f"{name} is {got}, expected {want}")
    prm = cfg.params
    for cell in Q_CELLS:
        p, q = getattr(P, cell), getattr(Q, cell)
        lo = max(0.0, float(prm.lower(p)))
        hi = float(prm.upper(p))
        if not lo - tol <= q <= hi + tol:
            problems.append(f"Q {cell}={q} outside [{lo}, {hi}]")
    r = residual_from_triplets(P, Q)
    if abs(r - result.max_value) > tol:
        problems.append(f"witness residual {r} differs from reported max {result.max_value}")
    return problems
