"""The two projection-free online solvers.

Both play an iterate, fold the round's fresh samples into a gradient oracle,
and move toward (or away from) an extreme point returned by the linear
minimization oracle, with a non-adaptive decreasing step size. The plain
solver tracks only the iterate; the away-step solver additionally maintains
the convex-combination decomposition of the iterate so it can reduce the
weight of the worst active atom, and it counts non-drop steps so the step
size only advances when real progress steps are taken.

Branch semantics of one away-solver step at iterate ``theta`` with surrogate
gradient ``ghat``:

1. ``a_fw`` minimizes ``<a, ghat>`` over the feasible set; ``a_aw`` maximizes
   ``<a, ghat>`` over the active atoms (ties to the lowest canonical key).
2. If ``<a_fw - theta, ghat> <= <theta - a_aw, ghat>`` or the active set is
   empty (or holds a single atom, whose weight is necessarily 1), a forward
   step is taken: the non-drop counter advances and the step size is the
   schedule value at the new count.
3. Otherwise the away direction wins. If ``gamma_max = alpha/(1 - alpha)`` is
   at least the schedule value at the current count, this is an away step
   (counter advances, schedule step used); else the step is clipped to
   ``gamma_max``, which zeroes the away atom's weight and drops it, and the
   counter does not advance.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .core import ActiveSet, StepSchedule, step_size, zeros
from .exceptions import ShapeMismatchError, UnsupportedConstraintError
from .lmo import ConstraintSet, TraceNormBall, lmo
from .metrics import RoundEval, Trace, geometric_checkpoints, grad_error, inner

# Tolerance on the drop boundary: an away step this close to gamma_max is not
# treated as a drop by the branch rule (guards against float rounding).
DROP_BOUNDARY_TOL = 1e-12

# Steps between exact recomputations of theta from the active set.
RESYNC_INTERVAL = 512


@dataclass(slots=True)
class StepRecord:
    """One solver step: which branch ran, its step size, and the duality gaps."""

    t: int
    n: int
    kind: str  # "FW" | "AW" | "Drop"
    gamma: float
    g_fw: float
    g_aw: float | None = None
    atom_key: object = None
    away_key: object = None
    elapsed_ns: int = 0


@dataclass
class OfwState:
    """Iterate and step counter of the plain online solver."""

    theta: np.ndarray
    schedule: StepSchedule
    t: int = 1


@dataclass
class OawState:
    """Iterate, active set, round counter, and non-drop counter of the away solver."""

    theta: np.ndarray
    schedule: StepSchedule
    active: ActiveSet = field(default_factory=ActiveSet)
    t: int = 1
    n: int = 0


def ofw_init(constraint: ConstraintSet, schedule: StepSchedule) -> OfwState:
    return OfwState(theta=zeros(constraint.shape), schedule=schedule)


def oaw_init(constraint: ConstraintSet, schedule: StepSchedule) -> OawState:
    if isinstance(constraint, TraceNormBall):
        raise UnsupportedConstraintError(
            "the away solver enumerates active atoms and only supports atomic "
            "(l1 ball / vertex polytope) constraint sets"
        )
    return OawState(theta=zeros(constraint.shape), schedule=schedule)


def _check_gradient(ghat, theta: np.ndarray) -> None:
    if ghat.shape != theta.shape:
        raise ShapeMismatchError(f"gradient shape {ghat.shape} does not match iterate {theta.shape}")
    data = ghat.data if sp.issparse(ghat) else ghat
    if not np.all(np.isfinite(data)):
        raise ValueError("gradient contains non-finite entries")


def ofw_step(state: OfwState, ghat, constraint: ConstraintSet) -> tuple[OfwState, StepRecord]:
    """One forward step ``theta <- theta + gamma * (a - theta)``; mutates ``state``."""
    t0 = time.perf_counter_ns()
    _check_gradient(ghat, state.theta)
    atom = lmo(constraint, ghat)
    g_fw = inner(ghat, state.theta) - atom.dot(ghat)
    gamma = step_size(state.schedule, state.t)
    state.theta *= 1.0 - gamma
    atom.add_to(state.theta, gamma)
    record = StepRecord(
        t=state.t,
        n=state.t,
        kind="FW",
        gamma=gamma,
        g_fw=g_fw,
        atom_key=atom.key(),
        elapsed_ns=time.perf_counter_ns() - t0,
    )
    state.t += 1
    return state, record


def oaw_step(state: OawState, ghat, constraint: ConstraintSet) -> tuple[OawState, StepRecord]:
    """One away-solver step (forward, away, or drop); mutates ``state``."""
    t0 = time.perf_counter_ns()
    if isinstance(constraint, TraceNormBall):
        raise UnsupportedConstraintError("away solver does not support the trace-norm ball")
    _check_gradient(ghat, state.theta)
    theta = state.theta
    active = state.active

    atom_fw = lmo(constraint, ghat)
    fw_score = atom_fw.dot(ghat)
    theta_score = inner(ghat, theta)
    g_fw = theta_score - fw_score

    g_aw = None
    away_key = None
    away_atom = None
    away_score = -math.inf
    if len(active) > 0:
        for atom, _ in active.items():
            score = atom.dot(ghat)
            key = atom.key()
            if score > away_score or (score == away_score and key < away_key):
                away_score = score
                away_key = key
                away_atom = atom
        g_aw = away_score - fw_score

    take_fw = (
        len(active) <= 1  # empty, or a single atom whose weight is 1
        or (fw_score - theta_score) <= (theta_score - away_score)
    )
    if take_fw:
        state.n += 1
        gamma = step_size(state.schedule, state.n)
        active.apply_fw_step(atom_fw, gamma)
        theta *= 1.0 - gamma
        atom_fw.add_to(theta, gamma)
        kind = "FW"
        step_atom_key = atom_fw.key()
    else:
        gamma_max = active.gamma_max(away_key)
        if gamma_max >= step_size(state.schedule, state.n) - DROP_BOUNDARY_TOL:
            state.n += 1
            gamma = step_size(state.schedule, state.n)
            if gamma > gamma_max + DROP_BOUNDARY_TOL:
                raise AssertionError(
                    "schedule step exceeded gamma_max on an away step; "
                    "schedules must be decreasing"
                )
            kind = "AW"
        else:
            gamma = gamma_max
            kind = "Drop"
        active.apply_away_step(away_key, gamma)
        theta *= 1.0 + gamma
        away_atom.add_to(theta, -gamma)
        step_atom_key = away_key

    record = StepRecord(
        t=state.t,
        n=state.n,
        kind=kind,
        gamma=gamma,
        g_fw=g_fw,
        g_aw=g_aw,
        atom_key=step_atom_key,
        away_key=away_key,
        elapsed_ns=time.perf_counter_ns() - t0,
    )
    if 2 * state.n < state.t:
        raise AssertionError(f"non-drop counter {state.n} fell below half of step {state.t}")
    state.t += 1
    if state.t % RESYNC_INTERVAL == 0:
        state.theta = active.point(theta.shape)
    return state, record


def run(
    solver: str,
    oracle,
    constraint: ConstraintSet,
    schedule: StepSchedule,
    horizon: int,
    stream,
    batch_size: int = 1,
    inner_repeats: int = 1,
    f=None,
    grad_f=None,
    cadence: str = "geometric",
    geometric_ratio: float = 2.0,
    metadata: dict | None = None,
) -> Trace:
    """Drive a solver against an oracle fed from a sample stream.

    Parameters
    ----------
    solver : "ofw" or "oaw".
    oracle : gradient aggregator with ``observe(sample)`` / ``gradient(theta)``.
    horizon : number of rounds to play.
    stream : iterator of samples; exhausting it truncates the run (flagged).
    batch_size : samples pulled into the oracle per round.
    inner_repeats : solver steps per round, each re-querying the oracle's
        gradient at the updated iterate.
    f, grad_f : optional exact objective / gradient closures; when given,
        checkpoint rounds record the objective value and gradient errors.
    cadence : "geometric" evaluates at geometrically spaced rounds plus the
        final round; "every" evaluates every round.
    """
    if horizon < 1 or batch_size < 1 or inner_repeats < 1:
        raise ValueError("horizon, batch_size and inner_repeats must all be >= 1")
    if solver == "ofw":
        state = ofw_init(constraint, schedule)
        step_fn = ofw_step
    elif solver == "oaw":
        state = oaw_init(constraint, schedule)
        step_fn = oaw_step
    else:
        raise ValueError(f"unknown solver {solver!r}")

    if cadence == "geometric":
        eval_rounds = set(geometric_checkpoints(horizon, geometric_ratio))
    elif cadence == "every":
        eval_rounds = set(range(1, horizon + 1))
    else:
        raise ValueError(f"unknown cadence {cadence!r}")

    trace = Trace(metadata=dict(metadata or {}))
    trace.metadata.update(
        solver=solver,
        schedule=repr(schedule),
        horizon=horizon,
        batch_size=batch_size,
        inner_repeats=inner_repeats,
        cadence=cadence,
    )
    stream = iter(stream)
    wall_start = time.perf_counter()
    matrix_shaped = len(constraint.shape) == 2

    for round_idx in range(1, horizon + 1):
        evaluating = round_idx in eval_rounds
        ev = RoundEval(t=state.t) if evaluating else None
        if evaluating and f is not None:
            ev.f_value = float(f(state.theta))

        pulled = 0
        for _ in range(batch_size):
            sample = next(stream, None)
            if sample is None:
                break
            oracle.observe(sample)
            pulled += 1
        if pulled < batch_size:
            trace.truncated = True
        if pulled == 0:
            if ev is not None:
                trace.evals.append(ev)
            break

        if evaluating and grad_f is not None:
            ghat = oracle.gradient(state.theta)
            g_true = grad_f(state.theta)
            ev.grad_err_inf = grad_error(ghat, g_true, "inf")
            if matrix_shaped:
                ev.grad_err_op = grad_error(ghat, g_true, "op")
        if ev is not None:
            trace.evals.append(ev)

        for _ in range(inner_repeats):
            ghat = oracle.gradient(state.theta)
            _, record = step_fn(state, ghat, constraint)
            trace.records.append(record)

        if trace.truncated:
            break

    trace.metadata["wall_time_s"] = time.perf_counter() - wall_start
    if hasattr(oracle, "saturation_count"):
        trace.metadata["saturation_count"] = oracle.saturation_count
    return trace
