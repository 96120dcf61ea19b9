"""Metrics the convergence claims speak about: optimality gaps, average regret,
duality gaps, gradient-error norms, and log-log slope fits for rate checks."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .exceptions import ShapeMismatchError
from .lmo import PowerIterConfig, top_singular_pair

# Negative optimality gaps below this floor are clamped (they can only arise
# from a numerical reference optimum).
GAP_REPORT_FLOOR = -1e-9


def inner(g, x: np.ndarray) -> float:
    """Inner product between a (possibly sparse) gradient and a dense point."""
    if sp.issparse(g):
        if g.shape != x.shape:
            raise ShapeMismatchError(f"shapes {g.shape} and {x.shape} do not match")
        return float(g.multiply(x).sum())
    g = np.asarray(g)
    if g.shape != x.shape:
        raise ShapeMismatchError(f"shapes {g.shape} and {x.shape} do not match")
    return float(np.vdot(g.ravel(), x.ravel()))


def densify(g) -> np.ndarray:
    return np.asarray(g.todense()) if sp.issparse(g) else np.asarray(g)


def primal_gap(f_value: float, f_star: float) -> float:
    """Optimality gap ``f(theta) - f_star``, floored at a tiny negative value."""
    h = f_value - f_star
    if h < GAP_REPORT_FLOOR:
        warnings.warn(
            f"optimality gap {h:.3e} below the reporting floor; reference optimum is inconsistent",
            RuntimeWarning,
        )
        return GAP_REPORT_FLOOR
    return h


def average_regret(f_values, f_star: float) -> float:
    """Average excess loss of the played sequence over the best fixed point."""
    values = np.asarray(list(f_values), dtype=float)
    if values.size == 0:
        raise ValueError("regret of an empty sequence is undefined")
    return float(values.mean() - f_star)


def duality_gap_fw(ghat, theta: np.ndarray, atom) -> float:
    """``<ghat, theta - atom>`` without densifying rank-one atoms."""
    return inner(ghat, theta) - atom.dot(ghat)


def duality_gap_aw(ghat, away_atom, fw_atom) -> float:
    """``<ghat, away_atom - fw_atom>``."""
    return away_atom.dot(ghat) - fw_atom.dot(ghat)


def grad_error(ghat, g_true, norm: str = "inf") -> float:
    """Norm of the surrogate-gradient error in the requested norm.

    ``inf`` is the entrywise max; ``op`` is the operator (top singular value)
    norm and is only defined for matrix shapes.
    """
    diff = densify(ghat) - densify(g_true)
    if norm == "inf":
        return float(np.max(np.abs(diff))) if diff.size else 0.0
    if norm == "op":
        if diff.ndim != 2:
            raise ShapeMismatchError("operator norm requires a matrix shape")
        return top_singular_pair(diff, PowerIterConfig(tol=1e-10, max_iter=5000)).sigma
    raise ValueError(f"unknown norm {norm!r}")


class SlopeFit(NamedTuple):
    slope: float
    intercept: float
    r_squared: float


def loglog_slope(series, window: tuple[float, float]) -> SlopeFit:
    """Least-squares slope of ``log(value)`` against ``log(t)`` over a window.

    Nonpositive values cannot be log-fitted and are excluded with a warning;
    at least 5 usable points must remain.
    """
    lo, hi = window
    ts, vals = [], []
    excluded = 0
    for t, v in series:
        if not lo <= t <= hi:
            continue
        if v <= 0:
            excluded += 1
            continue
        ts.append(t)
        vals.append(v)
    if excluded:
        warnings.warn(f"{excluded} nonpositive values excluded from the log-log fit", RuntimeWarning)
    if len(ts) < 5:
        raise ValueError(f"need at least 5 positive points in window {window}, have {len(ts)}")
    x = np.log(np.asarray(ts, dtype=float))
    y = np.log(np.asarray(vals, dtype=float))
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else 1.0 - float(np.sum(resid**2)) / ss_tot
    return SlopeFit(float(slope), float(intercept), r2)


@dataclass
class RoundEval:
    """Metrics evaluated on the played iterate at the start of a round."""

    t: int
    f_value: float | None = None
    grad_err_inf: float | None = None
    grad_err_op: float | None = None


@dataclass
class Trace:
    """Per-step records plus checkpointed evaluations of one solver run."""

    records: list = field(default_factory=list)
    evals: list[RoundEval] = field(default_factory=list)
    metadata: dict = field(default_factory=dict)
    truncated: bool = False

    def gap_series(self, gap: str = "fw"):
        attr = "g_fw" if gap == "fw" else "g_aw"
        return [(r.t, getattr(r, attr)) for r in self.records if getattr(r, attr) is not None]

    def eval_series(self, fieldname: str):
        return [(e.t, getattr(e, fieldname)) for e in self.evals if getattr(e, fieldname) is not None]


def min_gap_tail(trace: Trace, horizon: int, gap: str = "fw") -> float:
    """Minimum recorded duality gap over steps ``horizon//2 + 1 .. horizon``."""
    if not trace.records or trace.records[-1].t < horizon:
        raise ValueError(f"trace does not cover {horizon} steps")
    lo = horizon // 2 + 1
    vals = [v for t, v in trace.gap_series(gap) if lo <= t <= horizon]
    if not vals:
        raise ValueError(f"no {gap} gap records in tail [{lo}, {horizon}]")
    return min(vals)


def geometric_checkpoints(horizon: int, ratio: float = 2.0) -> list[int]:
    """Rounds to evaluate metrics at: 1, then geometric growth, plus the final round."""
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if ratio <= 1.0:
        raise ValueError("ratio must exceed 1")
    points = []
    t = 1
    while t < horizon:
        points.append(t)
        t = max(t + 1, int(np.ceil(t * ratio)))
    points.append(horizon)
    return points
