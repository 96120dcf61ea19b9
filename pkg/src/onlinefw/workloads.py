"""Synthetic problem generators with known or reference optima.

Every generator returns a ``Workload`` bundling the constraint set, factories
for a fresh gradient oracle and a seeded sample stream, and (where available)
closed-form objective and gradient closures used for metric evaluation. The
noisy objectives include their irreducible noise constant so the optimality
gap decays to zero rather than to a floor.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Callable, Iterator, NamedTuple

import numpy as np

from .core import Harmonic, step_size, zeros
from .gradients import (
    GAUSSIAN,
    LINKS,
    LabeledVector,
    LassoSample,
    LassoStats,
    LinkFunction,
    LogisticLoss,
    McSample,
    McStats,
    ReplayStats,
    SigmoidLoss,
)
from .lmo import ConstraintSet, L1Ball, PowerIterConfig, TraceNormBall, lmo
from .metrics import inner

# Above this many matrix cells a generated completion instance is flagged as
# long-running (paper-scale rather than desk-scale).
DESK_SCALE_CELLS = 200_000


@dataclass
class Workload:
    """A runnable problem instance.

    ``make_oracle()`` returns a fresh aggregator and ``make_stream()`` a fresh
    seeded sample iterator, so independent runs of the same workload see the
    same data. ``f``/``grad_f`` are exact closures when the model admits them;
    ``f_star``/``theta_star`` are populated for interior-optimum instances.
    """

    name: str
    constraint: ConstraintSet
    make_oracle: Callable[[], object]
    make_stream: Callable[[], Iterator]
    f: Callable[[np.ndarray], float] | None = None
    grad_f: Callable[[np.ndarray], np.ndarray] | None = None
    f_star: float | None = None
    theta_star: np.ndarray | None = None
    metadata: dict = field(default_factory=dict)


def _sparse_ground_truth(rng: np.random.Generator, n: int, sparsity_frac: float) -> np.ndarray:
    k = math.ceil(sparsity_frac * n)
    support = rng.choice(n, size=k, replace=False)
    theta_bar = np.zeros(n)
    theta_bar[support] = rng.standard_normal(k)
    return theta_bar


def gen_fixed_design_lasso(
    n: int,
    m: int,
    sparsity_frac: float = 0.1,
    sigma_w: float = 10.0,
    r_factor: float = 1.1,
    seed: int = 0,
) -> Workload:
    """Sparse regression with one fixed Gaussian design replayed every round.

    The stream emits ``(A, A theta_bar + noise)`` with fresh Gaussian noise of
    scale ``sigma_w``; the feasible set is the l1 ball of radius ``r_factor``
    times the ground truth's l1 norm, so ``r_factor > 1`` puts the optimum in
    the interior and pins ``f_star`` in closed form.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if not 0 < sparsity_frac <= 1:
        raise ValueError("sparsity_frac must lie in (0, 1]")
    if sigma_w < 0 or r_factor <= 0:
        raise ValueError("sigma_w must be >= 0 and r_factor > 0")
    rng = np.random.default_rng([seed, 0])
    theta_bar = _sparse_ground_truth(rng, n, sparsity_frac)
    design = rng.standard_normal((m, n))
    gram = design.T @ design
    clean_response = design @ theta_bar
    gram_theta_bar = gram @ theta_bar
    noise_floor = 0.5 * m * sigma_w**2
    radius = r_factor * float(np.abs(theta_bar).sum())

    def f(theta):
        return 0.5 * float(np.sum((design @ theta - clean_response) ** 2)) + noise_floor

    def grad_f(theta):
        return gram @ theta - gram_theta_bar

    def make_stream():
        stream_rng = np.random.default_rng([seed, 1])
        while True:
            yield LassoSample(design, clean_response + sigma_w * stream_rng.standard_normal(m))

    interior = r_factor > 1.0
    return Workload(
        name="fixed_design_lasso",
        constraint=L1Ball(radius, n),
        make_oracle=lambda: LassoStats(n),
        make_stream=make_stream,
        f=f,
        grad_f=grad_f,
        f_star=noise_floor if interior else None,
        theta_star=theta_bar.copy() if interior else None,
        metadata={"theta_bar": theta_bar, "design": design, "sigma_w": sigma_w, "seed": seed},
    )


def gen_random_design_lasso(
    n: int,
    m: int,
    sparsity_frac: float = 0.1,
    sigma_w: float = 10.0,
    r_factor: float = 1.1,
    seed: int = 0,
) -> Workload:
    """Sparse regression with a fresh Gaussian design every round.

    With standard-normal designs the expected Gram matrix is ``m I``, so the
    stochastic objective and gradient are exact: ``f`` is a scaled quadratic
    around the ground truth.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if not 0 < sparsity_frac <= 1:
        raise ValueError("sparsity_frac must lie in (0, 1]")
    if sigma_w < 0 or r_factor <= 0:
        raise ValueError("sigma_w must be >= 0 and r_factor > 0")
    rng = np.random.default_rng([seed, 0])
    theta_bar = _sparse_ground_truth(rng, n, sparsity_frac)
    noise_floor = 0.5 * m * sigma_w**2
    radius = r_factor * float(np.abs(theta_bar).sum())

    def f(theta):
        return 0.5 * m * float(np.sum((theta - theta_bar) ** 2)) + noise_floor

    def grad_f(theta):
        return m * (theta - theta_bar)

    def make_stream():
        stream_rng = np.random.default_rng([seed, 1])
        while True:
            design = stream_rng.standard_normal((m, n))
            noise = sigma_w * stream_rng.standard_normal(m)
            yield LassoSample(design, design @ theta_bar + noise)

    interior = r_factor > 1.0
    return Workload(
        name="random_design_lasso",
        constraint=L1Ball(radius, n),
        make_oracle=lambda: LassoStats(n),
        make_stream=make_stream,
        f=f,
        grad_f=grad_f,
        f_star=noise_floor if interior else None,
        theta_star=theta_bar.copy() if interior else None,
        metadata={"theta_bar": theta_bar, "sigma_w": sigma_w, "seed": seed},
    )


def gen_mc(
    m1: int,
    m2: int,
    rank: int,
    noise_var: float = 1.0,
    R_factor: float = 1.1,
    link: LinkFunction | str = GAUSSIAN,
    seed: int = 0,
    lmo_tol: float = 1e-6,
    lmo_max_iter: int = 200,
) -> Workload:
    """Entrywise matrix observations of a low-rank ground truth under uniform
    cell sampling, constrained to a trace-norm ball.

    The ground truth is a product of seeded Gaussian factors; its nuclear norm
    (dense SVD at generation time) scaled by ``R_factor`` sets the ball radius.
    Observation noise follows the link: additive Gaussian of variance
    ``noise_var`` for the Gaussian link, Bernoulli / Poisson sampling for the
    logistic / Poisson links. ``lmo_tol`` / ``lmo_max_iter`` configure the
    power-iteration oracle of the trace-norm ball; the looser-than-default
    tolerance trades oracle accuracy (absorbed as gradient-like error) for
    per-round speed.
    """
    if isinstance(link, str):
        link = LINKS[link]
    if rank < 1 or rank > min(m1, m2):
        raise ValueError("rank must lie in [1, min(m1, m2)]")
    if noise_var < 0 or R_factor <= 0:
        raise ValueError("noise_var must be >= 0 and R_factor > 0")
    if m1 * m2 > DESK_SCALE_CELLS:
        warnings.warn(
            f"{m1}x{m2} exceeds desk scale; generation and runs will be slow", RuntimeWarning
        )
    rng = np.random.default_rng([seed, 0])
    theta_bar = rng.standard_normal((m1, rank)) @ rng.standard_normal((m2, rank)).T
    nuclear = float(np.linalg.svd(theta_bar, compute_uv=False).sum())
    radius = R_factor * nuclear
    cells = m1 * m2
    mean_bar = np.asarray(link.mean(theta_bar))
    if link.name == "gaussian":
        shift = 0.5 * float(np.sum(theta_bar**2)) / cells + 0.5 * noise_var
    else:
        shift = 0.0

    def f(theta):
        return float(np.sum(link.log_partition(theta) - mean_bar * theta)) / cells + shift

    def grad_f(theta):
        return (np.asarray(link.mean(theta)) - mean_bar) / cells

    def make_stream():
        stream_rng = np.random.default_rng([seed, 1])
        noise_sd = math.sqrt(noise_var)
        while True:
            k = int(stream_rng.integers(m1))
            li = int(stream_rng.integers(m2))
            if link.name == "gaussian":
                y = theta_bar[k, li] + noise_sd * stream_rng.standard_normal()
            elif link.name == "logistic":
                y = float(stream_rng.random() < mean_bar[k, li])
            else:
                y = float(stream_rng.poisson(mean_bar[k, li]))
            yield McSample(k, li, float(y))

    interior = R_factor > 1.0
    power_cfg = PowerIterConfig(tol=lmo_tol, max_iter=lmo_max_iter, seed=seed)
    return Workload(
        name="mc",
        constraint=TraceNormBall(radius, m1, m2, power_iter=power_cfg),
        make_oracle=lambda: McStats((m1, m2), link),
        make_stream=make_stream,
        f=f,
        grad_f=grad_f,
        f_star=f(theta_bar) if interior else None,
        theta_star=theta_bar.copy() if interior else None,
        metadata={"theta_bar": theta_bar, "nuclear_norm": nuclear, "link": link.name, "seed": seed},
    )


def gen_classification(
    m1: int,
    m2: int,
    rank: int,
    n_train: int,
    flip_frac: float = 0.0,
    seed: int = 0,
    loss: str = "sigmoid",
    constraint_kind: str = "l1",
    radius: float = 1.0,
) -> Workload:
    """Binary classification of Gaussian matrix features against a low-rank
    ground-truth classifier, with an optional fraction of flipped labels.

    The stream is finite (``n_train`` samples). Features are flattened when
    the constraint is the l1 ball and kept as matrices for the trace-norm
    ball. The expected loss has no closed form, so no objective closure or
    optimum is attached; convergence is assessed through duality gaps.
    """
    if rank < 1 or rank > min(m1, m2):
        raise ValueError("rank must lie in [1, min(m1, m2)]")
    if not 0 <= flip_frac < 1:
        raise ValueError("flip_frac must lie in [0, 1)")
    if n_train < 1:
        raise ValueError("n_train must be positive")
    rng = np.random.default_rng([seed, 0])
    theta_bar = rng.standard_normal((m1, rank)) @ rng.standard_normal((m2, rank)).T

    if constraint_kind == "l1":
        constraint: ConstraintSet = L1Ball(radius, m1 * m2)
        feature_shape: tuple[int, ...] = (m1 * m2,)
    elif constraint_kind == "trace":
        constraint = TraceNormBall(radius, m1, m2)
        feature_shape = (m1, m2)
    else:
        raise ValueError(f"unknown constraint kind {constraint_kind!r}")

    if loss == "sigmoid":
        loss_kind = SigmoidLoss()
    elif loss == "logistic":
        loss_kind = LogisticLoss()
    else:
        raise ValueError(f"unknown loss {loss!r}")

    def make_stream():
        stream_rng = np.random.default_rng([seed, 1])
        for _ in range(n_train):
            x = stream_rng.standard_normal((m1, m2))
            label = 1 if float(np.vdot(theta_bar, x)) >= 0.0 else -1
            if flip_frac > 0.0 and stream_rng.random() < flip_frac:
                label = -label
            yield LabeledVector(x.reshape(feature_shape), label)

    return Workload(
        name="classification",
        constraint=constraint,
        make_oracle=lambda: ReplayStats(feature_shape, loss_kind),
        make_stream=make_stream,
        metadata={
            "theta_bar": theta_bar,
            "flip_frac": flip_frac,
            "loss": loss,
            "n_train": n_train,
            "seed": seed,
        },
    )


class ReferenceSolution(NamedTuple):
    f_star: float
    certificate: float
    iterations: int
    theta: np.ndarray


def reference_solve(
    workload: Workload, budget: int = 1_000_000, gap_tol: float | None = None
) -> ReferenceSolution:
    """Exact-gradient forward-only baseline for workloads without a closed-form
    optimum.

    Runs the linear-minimization descent with the ``K=2`` harmonic schedule for
    up to ``budget`` iterations and returns the smallest objective value seen.
    The certificate is the smallest observed duality gap, which upper-bounds
    the distance of the returned value from the true constrained minimum; when
    ``gap_tol`` is given the loop stops early once the certificate reaches it.
    """
    if workload.f is None or workload.grad_f is None:
        raise ValueError("reference solve needs exact objective and gradient closures")
    constraint = workload.constraint
    schedule = Harmonic(2)
    theta = zeros(constraint.shape)
    best_f = math.inf
    best_theta = theta.copy()
    best_gap = math.inf
    iterations = 0
    for it in range(1, budget + 1):
        iterations = it
        g = workload.grad_f(theta)
        atom = lmo(constraint, g)
        gap = inner(g, theta) - atom.dot(g)
        f_val = workload.f(theta)
        if f_val < best_f:
            best_f = f_val
            best_theta = theta.copy()
        if gap < best_gap:
            best_gap = gap
        if gap_tol is not None and best_gap <= gap_tol:
            break
        gamma = step_size(schedule, it)
        theta *= 1.0 - gamma
        atom.add_to(theta, gamma)
    return ReferenceSolution(best_f, best_gap, iterations, best_theta)
