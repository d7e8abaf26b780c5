"""Analytic residual bounds for three models and the bands they imply.

Residuals are vertical distances, measured along the Q-accuracy axis, from
the middle model's point to the line through the two outer models.
"""

from __future__ import annotations

import functools
import math
import warnings
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .closeness import ClosenessParams
from .events import TripletDistribution

Point = tuple[float, float]

COROLLARY_CONSTANT = 25 / 64


class DegenerateLineError(ValueError):
    """The two outer models share the same P-accuracy, so no line is defined."""


def line_through(a: Point, c: Point) -> tuple[float, float]:
    """(slope, intercept) of the line through two points."""
    (x0, y0), (x1, y1) = a, c
    if x1 == x0:
        raise DegenerateLineError(f"outer points share mu_p = {x0}")
    slope = (y1 - y0) / (x1 - x0)
    return slope, y0 - slope * x0


def _check_order(lo: float, mid: float, hi: float) -> None:
    if not lo <= mid <= hi:
        raise ValueError(f"P-accuracies must be ordered, got {lo}, {mid}, {hi}")
    if lo == hi:
        raise DegenerateLineError(f"outer P-accuracies coincide ({lo})")


def residual_from_accuracies(lo: Point, mid: Point, hi: Point) -> float:
    """|l(mu_p_mid) - mu_q_mid| for the line l through the outer points."""
    _check_order(lo[0], mid[0], hi[0])
    slope = (hi[1] - lo[1]) / (hi[0] - lo[0])
    return abs(lo[1] + slope * (mid[0] - lo[0]) - mid[1])


def residual_from_triplets(P: TripletDistribution, Q: TripletDistribution) -> float:
    """The middle model's residual written directly in terms of the cells.

    Models are taken in cell order (f1, f2, f3); the line passes through f1
    and f3.  ``p3 + p23 - p1 - p12`` is the P-accuracy gap between f3 and f1.
    """
    den = P.p3 + P.p23 - P.p1 - P.p12
    if den == 0:
        raise DegenerateLineError("f1 and f3 have equal P-accuracy")
    num = P.p2 + P.p23 - P.p1 - P.p13
    rise_q = Q.p3 + Q.p23 - Q.p1 - Q.p12
    return abs(rise_q / den * num + Q.p1 + Q.p13 - Q.p2 - Q.p23)


def halving_line(a: Point, b: Point, c: Point) -> tuple[float, float]:
    """Line through the midpoints of AB and BC.

    It is parallel to AC and sits halfway between AC and B, so all three
    points have the same residual, half of B's residual from AC.
    """
    slope, _ = line_through(a, c)
    mx, my = (a[0] + b[0]) / 2, (a[1] + b[1]) / 2
    return slope, my - slope * mx


@dataclass(frozen=True)
class BoundReport:
    triple: tuple[int, int, int]
    mu_p: tuple[float, float, float]
    bound_value: float
    halved_value: float
    line: tuple[float, float] | None = None
    residual: float | None = None

    def to_dict(self) -> dict:
        return {
            "triple": list(self.triple),
            "mu_p": list(self.mu_p),
            "bound": self.bound_value,
            "halved": self.halved_value,
            "line": None if self.line is None else {"slope": self.line[0], "intercept": self.line[1]},
            "residual": self.residual,
        }


def _prop1_value(mu_i: float, mu_j: float, mu_k: float, params: ClosenessParams) -> float:
    span = mu_k - mu_i
    left, right = mu_j - mu_i, mu_k - mu_j
    harmonic = 2 * right * left / span
    return (
        params.mean_delta * harmonic
        + params.max_nu
        + (1 + max(right, left) / span) * params.nu2
    )


def prop1_bound(
    mu_i: float,
    mu_j: float,
    mu_k: float,
    params: ClosenessParams,
    mu_q: Sequence[float] | None = None,
    triple: tuple[int, int, int] = (0, 1, 2),
) -> BoundReport:
    """Residual bound for an ordered model set under wedge closeness.

    With ``mu_q`` (the three Q-accuracies) the report also carries the line
    through the outer points and the actual residual of the middle model.
    """
    if params.segment2 is not None:
        raise ValueError("the analytic bound takes a single-segment wedge")
    if params.coverage < 1.0:
        warnings.warn(
            f"wedge covers only {params.coverage:.0%} of events; the bound assumes all",
            stacklevel=2,
        )
    _check_order(mu_i, mu_j, mu_k)
    value = _prop1_value(mu_i, mu_j, mu_k, params)
    line = residual = None
    if mu_q is not None:
        qi, qj, qk = mu_q
        line = line_through((mu_i, qi), (mu_k, qk))
        residual = residual_from_accuracies((mu_i, qi), (mu_j, qj), (mu_k, qk))
    return BoundReport(tuple(triple), (mu_i, mu_j, mu_k), value, value / 2, line, residual)


def corollary_bound(mu_min: float, mu_max: float, params: ClosenessParams) -> float:
    """Residual every model attains against some common line (ordered sets)."""
    if mu_min > mu_max:
        raise ValueError(f"mu_min {mu_min} exceeds mu_max {mu_max}")
    return COROLLARY_CONSTANT * (mu_max - mu_min) * params.mean_delta + 3 * params.max_nu


@functools.lru_cache(maxsize=4096)
def _grid_residual(mu: tuple[float, float, float], params: ClosenessParams, zeta: float,
                   p_grid_step: float, q_grid_points: int) -> float:
    from .gridbound import GridSearchConfig, max_residual_grid

    cfg = GridSearchConfig(zeta, mu, params, p_grid_step, q_grid_points)
    return max_residual_grid(cfg).max_value


def residual_bound(
    mu_i: float,
    mu_j: float,
    mu_k: float,
    params: ClosenessParams,
    zeta: float = 0.0,
    p_grid_step: float = 0.01,
    q_grid_points: int = 5,
) -> float:
    """Bound on the middle residual: analytic for zeta = 0, else also gridded.

    For zeta > 0 the result is ``max(analytic, grid)``, so the band never
    gets narrower when dominance is relaxed.
    """
    value = _prop1_value(mu_i, mu_j, mu_k, params)
    if zeta > 0:
        key = tuple(round(v, 12) for v in (mu_i, mu_j, mu_k))
        value = max(value, _grid_residual(key, params, zeta, p_grid_step, q_grid_points))
    return value


@dataclass(frozen=True)
class Band:
    mu_p: np.ndarray
    lower: np.ndarray
    upper: np.ndarray

    def to_csv(self) -> str:
        rows = ["mu_p,lower,upper"]
        rows += [f"{m!r},{lo!r},{up!r}" for m, lo, up in
                 zip(self.mu_p.tolist(), self.lower.tolist(), self.upper.tolist())]
        return "\n".join(rows) + "\n"


def _check_anchors(anchors: Sequence[Point]) -> list[Point]:
    pts = [(float(x), float(y)) for x, y in anchors]
    if len(pts) < 2:
        raise ValueError("need at least two anchors")
    if any(b[0] <= a[0] for a, b in zip(pts, pts[1:])):
        raise ValueError("anchors must be sorted by strictly increasing mu_p")
    return pts


def feasible_band(
    anchors: Sequence[Point],
    params: ClosenessParams,
    zeta: float = 0.0,
    grid: Sequence[float] | np.ndarray | None = None,
    p_grid_step: float = 0.01,
    q_grid_points: int = 5,
) -> Band:
    """Range of Q-accuracies a further model may have, per P-accuracy on ``grid``.

    Every anchor pair bracketing a grid value contributes one residual bound
    around its chord; the band is the intersection.  At an anchor's own
    P-accuracy the band is that anchor's Q-accuracy.  ``lower > upper``
    means the anchors themselves are inconsistent with the wedge.
    """
    pts = _check_anchors(anchors)
    if grid is None:
        grid = np.linspace(pts[0][0], pts[-1][0], 41)
    mus = np.asarray(grid, dtype=float)
    if mus.size and (mus.min() < pts[0][0] or mus.max() > pts[-1][0]):
        raise ValueError("grid points must lie within the anchors' mu_p range")
    anchor_q = {x: y for x, y in pts}
    lower = np.empty_like(mus)
    upper = np.empty_like(mus)
    for n, mu in enumerate(mus.tolist()):
        if mu in anchor_q:
            lower[n] = upper[n] = anchor_q[mu]
            continue
        lo, up = -math.inf, math.inf
        for a in range(len(pts)):
            if pts[a][0] >= mu:
                break
            for c in range(a + 1, len(pts)):
                if pts[c][0] <= mu:
                    continue
                slope, icpt = line_through(pts[a], pts[c])
                center = slope * mu + icpt
                r = residual_bound(pts[a][0], mu, pts[c][0], params, zeta, p_grid_step, q_grid_points)
                lo, up = max(lo, center - r), min(up, center + r)
        lower[n], upper[n] = lo, up
    return Band(mus, lower, upper)


def lower_bound_curve(
    anchors: Sequence[Point],
    params: ClosenessParams,
    zeta: float = 0.0,
    grid: Sequence[float] | np.ndarray | None = None,
    p_grid_step: float = 0.01,
    q_grid_points: int = 5,
) -> np.ndarray:
    return feasible_band(anchors, params, zeta, grid, p_grid_step, q_grid_points).lower
