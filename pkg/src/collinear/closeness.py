"""Wedge closeness of two distributions over triplet events.

A pair of distributions is wedge-close with parameters (delta1, delta2, nu1,
nu2) when every non-unanimous triplet event A satisfies

    -nu1 + (1 - delta1) * P(A)  <=  Q(A)  <=  nu2 + (1 + delta2) * P(A).

An optional second segment swaps in a looser upper bound for events with
small P(A), which is how the CIFAR-style wedge is expressed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .events import PATTERNS, PointArray, TripletPoint, as_point_array

#: tolerance used when deciding whether a point lies on a wedge boundary
BOUNDARY_TOL = 1e-12

DEFAULT_NU_GRID = tuple(round(0.001 * k, 3) for k in range(21))


@dataclass(frozen=True)
class Segment:
    """Upper bound used instead of the main one when P(A) < threshold."""

    threshold: float
    delta2: float
    nu2: float

    def __post_init__(self) -> None:
        if not 0.0 < self.threshold <= 1.0:
            raise ValueError(f"segment threshold must lie in (0, 1], got {self.threshold}")
        if self.delta2 < 0 or self.nu2 < 0:
            raise ValueError("segment delta2 and nu2 must be nonnegative")


@dataclass(frozen=True)
class ClosenessParams:
    delta1: float
    delta2: float
    nu1: float
    nu2: float
    coverage: float = 1.0
    segment2: Segment | None = None

    def __post_init__(self) -> None:
        for name in ("delta1", "delta2", "nu1", "nu2"):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a finite nonnegative number, got {v}")
        if not 0.0 < self.coverage <= 1.0:
            raise ValueError(f"coverage must lie in (0, 1], got {self.coverage}")

    @property
    def mean_delta(self) -> float:
        return (self.delta1 + self.delta2) / 2

    @property
    def max_nu(self) -> float:
        return max(self.nu1, self.nu2)

    def lower(self, p):
        return -self.nu1 + (1 - self.delta1) * np.asarray(p, dtype=float)

    def upper(self, p):
        p = np.asarray(p, dtype=float)
        up = self.nu2 + (1 + self.delta2) * p
        if self.segment2 is not None:
            s = self.segment2
            up = np.where(p < s.threshold, s.nu2 + (1 + s.delta2) * p, up)
        return up

    def as_tuple(self) -> tuple[float, float, float, float]:
        return self.delta1, self.delta2, self.nu1, self.nu2

    def to_dict(self) -> dict:
        d = {
            "delta1": self.delta1,
            "delta2": self.delta2,
            "nu1": self.nu1,
            "nu2": self.nu2,
            "coverage": self.coverage,
        }
        if self.segment2 is not None:
            s = self.segment2
            d["segment2"] = {"threshold": s.threshold, "delta2": s.delta2, "nu2": s.nu2}
        return d


@dataclass
class ViolationReport:
    total: int
    violating: int
    violations: list[TripletPoint] = field(default_factory=list)
    per_model: dict[str, int] = field(default_factory=dict)

    @property
    def coverage(self) -> float:
        return 1.0 - self.violating / self.total if self.total else 1.0

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "violating": self.violating,
            "coverage": self.coverage,
            "per_model": dict(self.per_model),
            "violations": [t._asdict() for t in self.violations],
        }


def _satisfied(pts: PointArray, params: ClosenessParams, tol: float) -> np.ndarray:
    return (pts.q >= params.lower(pts.p) - tol) & (pts.q <= params.upper(pts.p) + tol)


def check_closeness(
    points,
    params: ClosenessParams,
    model_names: Sequence[str] | None = None,
    tol: float = BOUNDARY_TOL,
) -> ViolationReport:
    """Count triplet events falling outside the wedge.

    Each violating event is charged to all three models of its triple.
    """
    pts = as_point_array(points)
    ok = _satisfied(pts, params, tol)
    bad = np.flatnonzero(~ok)
    h = 0 if len(pts) == 0 else int(max(pts.i.max(), pts.j.max(), pts.k.max())) + 1
    if model_names is not None:
        h = max(h, len(model_names))
    counts = np.zeros(h, dtype=np.int64)
    for col in (pts.i, pts.j, pts.k):
        np.add.at(counts, col[bad], 1)
    names = list(model_names) if model_names is not None else [str(m) for m in range(h)]
    per_model = {names[m]: int(counts[m]) for m in range(h)}
    violations = [
        TripletPoint(int(pts.i[n]), int(pts.j[n]), int(pts.k[n]),
                     PATTERNS[pts.pattern[n]], float(pts.p[n]), float(pts.q[n]))
        for n in bad
    ]
    return ViolationReport(len(pts), len(bad), violations, per_model)


def _required_upper_delta(p: np.ndarray, q: np.ndarray, nu: float) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    with np.errstate(over="ignore"):  # subnormal p gives +inf, which is the right answer
        out[pos] = np.maximum(0.0, (q[pos] - nu) / p[pos] - 1.0)
    out[~pos & (q > nu + BOUNDARY_TOL)] = np.inf
    return out


def _required_lower_delta(p: np.ndarray, q: np.ndarray, nu: float) -> np.ndarray:
    out = np.zeros_like(p)
    pos = p > 0
    with np.errstate(over="ignore"):
        out[pos] = np.maximum(0.0, 1.0 - (q[pos] + nu) / p[pos])
    return out


def _side_table(req_fn, p, q, nu_grid, budget, scale):
    """Best (objective, delta, nu) for each violation budget 0..budget on one side."""
    n = len(p)
    best_obj = np.full(budget + 1, np.inf)
    best_delta = np.full(budget + 1, np.inf)
    best_nu = np.zeros(budget + 1)
    for nu in nu_grid:
        req = np.sort(req_fn(p, q, nu))
        # with b violations allowed, delta must cover the (n - b) smallest requirements
        deltas = req[n - 1 - np.arange(budget + 1)]
        inf = np.isinf(deltas)
        obj = nu + np.where(inf, 0.0, deltas) * scale / 2
        obj[inf] = np.inf
        better = (obj < best_obj) | ((obj == best_obj) & (deltas < best_delta))
        best_obj = np.where(better, obj, best_obj)
        best_delta = np.where(better, deltas, best_delta)
        best_nu = np.where(better, nu, best_nu)
    return best_obj, best_delta, best_nu


def fit_wedge(
    points,
    coverage: float = 1.0,
    nu_grid: Iterable[float] = DEFAULT_NU_GRID,
) -> ClosenessParams:
    """Smallest wedge containing at least ``coverage`` of the points.

    For every intercept on ``nu_grid`` the slope term of each side is the
    smallest that leaves at most the allowed number of points outside.  A
    side's size is the area it adds between its bound and the diagonal over
    ``[0, max P(A)]`` (``nu + delta * max_p / 2`` up to a constant factor),
    and the violation budget is split between the two sides to minimize the
    summed size.  Ties prefer smaller slopes, then smaller intercepts.
    """
    if not 0.0 < coverage <= 1.0:
        raise ValueError(f"coverage must lie in (0, 1], got {coverage}")
    pts = as_point_array(points)
    n = len(pts)
    if n == 0:
        raise ValueError("cannot fit a wedge to an empty point stream")
    nu_grid = sorted(float(v) for v in nu_grid)
    if not nu_grid or nu_grid[0] < 0:
        raise ValueError("nu grid must be nonempty and nonnegative")
    budget = n - math.ceil(coverage * n - 1e-9)
    scale = float(pts.p.max())

    up = _side_table(_required_upper_delta, pts.p, pts.q, nu_grid, budget, scale)
    lo = _side_table(_required_lower_delta, pts.p, pts.q, nu_grid, budget, scale)

    best = None
    for b_up in range(budget + 1):
        b_lo = budget - b_up
        total = up[0][b_up] + lo[0][b_lo]
        key = (total, up[1][b_up] + lo[1][b_lo], up[2][b_up] + lo[2][b_lo], b_up)
        if best is None or key < best[0]:
            best = (key, b_up, b_lo)
    _, b_up, b_lo = best
    delta2, nu2 = float(up[1][b_up]), float(up[2][b_up])
    delta1, nu1 = float(lo[1][b_lo]), float(lo[2][b_lo])
    if not (math.isfinite(delta2) and math.isfinite(delta1)):
        raise ValueError(
            "no finite wedge on the nu grid covers the points "
            "(P(A) = 0 or vanishing P(A) with Q(A) above every intercept)"
        )
    params = ClosenessParams(delta1, delta2, nu1, nu2, coverage=coverage)
    achieved = check_closeness(pts, params).coverage
    if achieved + 1e-12 < coverage:
        raise RuntimeError(
            f"fitted wedge covers {achieved:.6f} of the points, below {coverage}"
        )
    return params


def outlier_models(report: ViolationReport, threshold: int) -> list[str]:
    """Models charged with more than ``threshold`` violating events, worst first."""
    flagged = [(c, name) for name, c in report.per_model.items() if c > threshold]
    flagged.sort(key=lambda t: (-t[0], t[1]))
    return [name for _, name in flagged]
