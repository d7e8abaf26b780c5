"""Linear, probit and two-piece linear trends through accuracy pairs."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .corrdata import AccuracyPairSet

PROBIT_CLIP = 1e-7

# Acklam's rational approximation to the standard normal quantile
# (relative error < 1.15e-9), followed by one Halley step against erfc.
_A = (-3.969683028665376e01, 2.209460984245205e02, -2.759285104469687e02,
      1.383577518672690e02, -3.066479806614716e01, 2.506628277459239e00)
_B = (-5.447609879822406e01, 1.615858368580409e02, -1.556989798598866e02,
      6.680131188771972e01, -1.328068155288572e01)
_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e00,
      -2.549732539343734e00, 4.374664141464968e00, 2.938163982698783e00)
_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e00,
      3.754408661907416e00)
_P_LOW = 0.02425


class DegenerateFitError(ValueError):
    """The fit is not identifiable from the given points."""


def normal_cdf(z: float) -> float:
    return 0.5 * math.erfc(-z / math.sqrt(2))


def _acklam(p: float) -> float:
    if p < _P_LOW:
        q = math.sqrt(-2 * math.log(p))
        return (((((_C[0] * q + _C[1]) * q + _C[2]) * q + _C[3]) * q + _C[4]) * q + _C[5]) / \
               ((((_D[0] * q + _D[1]) * q + _D[2]) * q + _D[3]) * q + 1)
    if p > 1 - _P_LOW:
        return -_acklam(1 - p)
    q = p - 0.5
    r = q * q
    return (((((_A[0] * r + _A[1]) * r + _A[2]) * r + _A[3]) * r + _A[4]) * r + _A[5]) * q / \
           (((((_B[0] * r + _B[1]) * r + _B[2]) * r + _B[3]) * r + _B[4]) * r + 1)


def _inverse_normal_cdf_scalar(p: float) -> float:
    if p == 0.5:
        return 0.0
    if p > 0.5:
        # work in the lower tail so p and 1 - p map to exact negatives
        return -_inverse_normal_cdf_scalar(1.0 - p)
    x = _acklam(p)
    e = normal_cdf(x) - p
    u = e * math.sqrt(2 * math.pi) * math.exp(x * x / 2)
    return x - u / (1 + x * u / 2)


def inverse_normal_cdf(p):
    """Standard normal quantile, accepting a scalar or an array.

    Inputs are clipped to ``[1e-7, 1 - 1e-7]`` (with a warning); values
    outside ``[0, 1]`` raise.
    """
    arr = np.asarray(p, dtype=float)
    if np.any(~np.isfinite(arr)) or np.any((arr < 0) | (arr > 1)):
        raise ValueError("probabilities must lie in [0, 1]")
    clipped = np.clip(arr, PROBIT_CLIP, 1 - PROBIT_CLIP)
    if np.any(clipped != arr):
        warnings.warn(
            f"probabilities clipped to [{PROBIT_CLIP}, {1 - PROBIT_CLIP}] before probit",
            stacklevel=2,
        )
    out = np.vectorize(_inverse_normal_cdf_scalar, otypes=[float])(clipped)
    return float(out) if out.ndim == 0 else out


def _normal_cdf_array(z: np.ndarray) -> np.ndarray:
    return np.vectorize(normal_cdf, otypes=[float])(z)


@dataclass
class FitReport:
    kind: str
    segments: list[tuple[float, float]]
    residuals: np.ndarray
    r_squared: float
    model_names: tuple[str, ...] = ()
    knot_index: int | None = None
    knot_mu_p: float | None = None
    probit_r_squared: float | None = None
    probit_max_residual: float | None = None
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return float(np.max(np.abs(self.residuals)))

    @property
    def slope(self) -> float:
        return self.segments[0][0]

    @property
    def intercept(self) -> float:
        return self.segments[0][1]

    def predict(self, mu_p) -> np.ndarray:
        x = np.asarray(mu_p, dtype=float)
        if self.kind == "linear":
            a, b = self.segments[0]
            return a * x + b
        if self.kind == "probit":
            a, b = self.segments[0]
            return _normal_cdf_array(a * np.asarray(inverse_normal_cdf(x)) + b)
        (a0, b0), (a1, b1) = self.segments
        return np.where(x <= self.knot_mu_p, a0 * x + b0, a1 * x + b1)

    def to_dict(self) -> dict:
        d = {
            "kind": self.kind,
            "segments": [{"slope": a, "intercept": b} for a, b in self.segments],
            "residuals": dict(zip(self.model_names, self.residuals.tolist())),
            "max_residual": self.max_residual,
            "r_squared": self.r_squared,
        }
        if self.kind == "piecewise":
            d["knot_index"] = self.knot_index
            d["knot_mu_p"] = self.knot_mu_p
        if self.kind == "probit":
            d["probit_r_squared"] = self.probit_r_squared
            d["probit_max_residual"] = self.probit_max_residual
        d.update(self.extra)
        return d


def _r_squared(y: np.ndarray, fitted: np.ndarray) -> float:
    ss_res = float(np.sum((y - fitted) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0:
        return 1.0 if ss_res == 0 else -math.inf
    return 1.0 - ss_res / ss_tot


def _line(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    if len(x) < 2 or np.all(x == x[0]):
        raise DegenerateFitError("need at least two distinct x values for a line")
    xm, ym = x.mean(), y.mean()
    slope = float(np.sum((x - xm) * (y - ym)) / np.sum((x - xm) ** 2))
    return slope, float(ym - slope * xm)


def ols_fit(pairs: AccuracyPairSet) -> FitReport:
    x, y = np.array(pairs.mu_p), np.array(pairs.mu_q)
    a, b = _line(x, y)
    fitted = a * x + b
    return FitReport("linear", [(a, b)], y - fitted, _r_squared(y, fitted), pairs.model_names)


def probit_fit(pairs: AccuracyPairSet) -> FitReport:
    """Line through (probit(mu_p), probit(mu_q)), reported in both domains."""
    x = np.asarray(inverse_normal_cdf(np.array(pairs.mu_p)))
    y = np.asarray(inverse_normal_cdf(np.array(pairs.mu_q)))
    a, b = _line(x, y)
    fitted_z = a * x + b
    mu_q = np.array(pairs.mu_q)
    fitted_mu = _normal_cdf_array(fitted_z)
    return FitReport(
        "probit",
        [(a, b)],
        mu_q - fitted_mu,
        _r_squared(mu_q, fitted_mu),
        pairs.model_names,
        probit_r_squared=_r_squared(y, fitted_z),
        probit_max_residual=float(np.max(np.abs(y - fitted_z))),
    )


def _hinge_design(x: np.ndarray, knot: float) -> np.ndarray:
    return np.column_stack([np.ones_like(x), x, np.maximum(0.0, x - knot)])


def piecewise_fit(pairs: AccuracyPairSet, switch_index: int, continuous: bool = True) -> FitReport:
    """Two-piece fit switching at the ``switch_index``-th least accurate model.

    ``switch_index`` is 1-based.  The default is a continuous hinge; with
    ``continuous=False`` the two pieces are fitted independently, the knot
    model belonging to the left piece.
    """
    h = len(pairs)
    if not 1 <= switch_index <= h - 1:
        raise ValueError(f"switch index must be in 1..{h - 1}, got {switch_index}")
    x, y = np.array(pairs.mu_p), np.array(pairs.mu_q)
    knot = float(x[switch_index - 1])
    n_left = int(np.sum(x <= knot))
    n_right = int(np.sum(x >= knot))
    if n_left < 2 or n_right < 2:
        raise DegenerateFitError(
            f"knot at rank {switch_index} leaves {n_left} point(s) left, {n_right} right; need 2 each"
        )
    if continuous:
        X = _hinge_design(x, knot)
        if np.linalg.matrix_rank(X) < 3:
            raise DegenerateFitError("hinge design is rank deficient")
        (c0, c1, c2), *_ = np.linalg.lstsq(X, y, rcond=None)
        c0, c1, c2 = float(c0), float(c1), float(c2)
        segments = [(c1, c0), (c1 + c2, c0 - c2 * knot)]
        fitted = X @ np.array([c0, c1, c2])
    else:
        left = x <= knot
        segments = [_line(x[left], y[left]), _line(x[~left], y[~left])]
        fitted = np.where(left, segments[0][0] * x + segments[0][1],
                          segments[1][0] * x + segments[1][1])
    return FitReport(
        "piecewise", segments, y - fitted, _r_squared(y, fitted), pairs.model_names,
        knot_index=switch_index, knot_mu_p=knot,
        extra={"continuous": continuous},
    )


def compare_fits(pairs: AccuracyPairSet, switch_index: int) -> dict:
    fits = {
        "linear": ols_fit(pairs),
        "probit": probit_fit(pairs),
        "piecewise": piecewise_fit(pairs, switch_index),
    }
    table = {k: {"max_residual": f.max_residual, "r_squared": f.r_squared} for k, f in fits.items()}
    table["probit"]["probit_r_squared"] = fits["probit"].probit_r_squared
    names = list(fits)
    diffs = {
        f"{a}-{b}": fits[a].r_squared - fits[b].r_squared
        for n, a in enumerate(names) for b in names[n + 1:]
    }
    return {"fits": fits, "table": table, "r_squared_differences": diffs}
