"""Linear minimization oracles: ``argmin_{a in C} <a, g>`` for the supported sets.

Three feasible-set families are covered: the scaled l1 ball (signed basis
atoms), explicit vertex polytopes, and the trace-norm (nuclear-norm) ball,
whose oracle reduces to the top singular pair of the gradient, computed here
by seeded power iteration with a residual-based stopping rule.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
import scipy.sparse as sp

from .core import RankOne, SignedBasis, Vertex
from .exceptions import ShapeMismatchError


@dataclass(frozen=True)
class PowerIterConfig:
    tol: float = 1e-8
    max_iter: int = 1000
    seed: int = 0

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tol must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class L1Ball:
    """``{theta : ||theta||_1 <= radius}`` in dimension ``dim``."""

    radius: float
    dim: int

    def __post_init__(self):
        if self.radius <= 0 or self.dim < 1:
            raise ValueError("l1 ball needs radius > 0 and dim >= 1")

    @property
    def shape(self):
        return (self.dim,)


@dataclass(frozen=True)
class VertexPolytope:
    """Convex hull of an explicit ``(n_vertices, dim)`` vertex table."""

    vertices: np.ndarray = field(compare=False)

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=float)
        if v.ndim != 2 or v.shape[0] < 1:
            raise ValueError("vertex table must be a non-empty 2-d array")
        object.__setattr__(self, "vertices", v)

    @property
    def shape(self):
        return (self.vertices.shape[1],)


@dataclass(frozen=True)
class TraceNormBall:
    """``{theta : sum of singular values <= radius}`` over m1 x m2 matrices."""

    radius: float
    m1: int
    m2: int
    power_iter: PowerIterConfig = PowerIterConfig()

    def __post_init__(self):
        if self.radius <= 0 or self.m1 < 1 or self.m2 < 1:
            raise ValueError("trace-norm ball needs radius > 0 and positive dims")

    @property
    def shape(self):
        return (self.m1, self.m2)


ConstraintSet = L1Ball | VertexPolytope | TraceNormBall


def lmo_l1(g: np.ndarray, radius: float) -> SignedBasis:
    """Minimizing atom of the l1 ball: the basis direction of the largest
    gradient entry, signed opposite to it.

    Ties break to the lowest index; a zero entry counts as positive sign, so
    the atom for a zero gradient is ``-radius * e_0``.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 1 or g.size == 0:
        raise ValueError("gradient must be a non-empty vector")
    if not np.all(np.isfinite(g)):
        raise ValueError("gradient contains non-finite entries")
    index = int(np.argmax(np.abs(g)))
    sign = -1 if g[index] >= 0.0 else 1
    return SignedBasis(index=index, sign=sign, radius=radius)


def lmo_vertices(g: np.ndarray, vertices: np.ndarray) -> Vertex:
    """Scan the vertex table for the smallest inner product; ties take the lowest id."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[0] == 0:
        raise ValueError("vertex table must be a non-empty 2-d array")
    g = np.asarray(g, dtype=float)
    if vertices.shape[1] != g.shape[0]:
        raise ShapeMismatchError("gradient dimension does not match the vertex table")
    vertex_id = int(np.argmin(vertices @ g))
    return Vertex(vertex_id=vertex_id, coords=vertices[vertex_id].copy())


class TopSingularPair(NamedTuple):
    u: np.ndarray
    sigma: float
    v: np.ndarray
    converged: bool


def _frobenius(mat) -> float:
    if sp.issparse(mat):
        return float(np.sqrt(mat.multiply(mat).sum()))
    return float(np.linalg.norm(mat))


# Sparse inputs below this many cells are densified before iterating; at desk
# scale the dense matvec is far cheaper than sparse-format overhead.
_DENSIFY_CELLS = 100_000


def top_singular_pair(mat, cfg: PowerIterConfig | None = None) -> TopSingularPair:
    """Dominant singular triple ``(u, sigma, v)`` by power iteration on the Gram
    operator, from a seeded random unit start.

    Stops once both residuals ``||M v - sigma u||`` and ``||M^T u - sigma v||``
    fall below ``tol * max(1, ||M||_F)``. If ``max_iter`` passes first, the best
    iterate is returned with ``converged=False`` and a warning.
    """
    if cfg is None:
        cfg = PowerIterConfig()
    m1, m2 = mat.shape
    fro = _frobenius(mat)
    if fro == 0.0:
        e0u = np.zeros(m1)
        e0u[0] = 1.0
        e0v = np.zeros(m2)
        e0v[0] = 1.0
        return TopSingularPair(e0u, 0.0, e0v, True)
    scale = max(1.0, fro)
    if sp.issparse(mat):
        if m1 * m2 <= _DENSIFY_CELLS:
            mat = np.asarray(mat.todense())
            mat_t = mat.T
        else:
            mat = sp.csr_array(mat)
            mat_t = sp.csr_array(mat.T)
    else:
        mat = np.asarray(mat, dtype=float)
        mat_t = mat.T

    rng = np.random.default_rng(cfg.seed)
    v = rng.standard_normal(m2)
    v /= math.sqrt(v @ v)
    u = np.zeros(m1)
    sigma = 0.0
    tol_abs = cfg.tol * scale
    converged = False
    for _ in range(cfg.max_iter):
        mv = mat @ v
        sigma = math.sqrt(float(mv @ mv))
        if sigma == 0.0:
            # Start vector fell in the null space; re-seed deterministically.
            v = rng.standard_normal(m2)
            v /= math.sqrt(v @ v)
            continue
        u = mv / sigma
        mtu = mat_t @ u
        res = mtu - sigma * v
        if math.sqrt(float(res @ res)) <= tol_abs:
            res_u = mv - sigma * u
            if math.sqrt(float(res_u @ res_u)) <= tol_abs:
                converged = True
                break
        nv = math.sqrt(float(mtu @ mtu))
        if nv == 0.0:
            converged = True  # u is an exact left singular vector with sigma
            break
        v = mtu / nv
    if not converged:
        warnings.warn(
            f"power iteration did not reach tol={cfg.tol} in {cfg.max_iter} iterations",
            RuntimeWarning,
        )
    return TopSingularPair(np.asarray(u).ravel(), sigma, np.asarray(v).ravel(), converged)


def lmo_trace(g, radius: float, cfg: PowerIterConfig | None = None) -> RankOne:
    """Minimizing rank-one atom ``-radius * u1 v1^T`` of the trace-norm ball,
    built from the gradient's top singular pair."""
    pair = top_singular_pair(g, cfg)
    return RankOne(u=pair.u, v=pair.v, radius=radius, negated=True)


def lmo(constraint: ConstraintSet, g):
    """Dispatch to the oracle matching the constraint variant."""
    if isinstance(constraint, L1Ball):
        g = np.asarray(g, dtype=float)
        if g.shape != constraint.shape:
            raise ShapeMismatchError(f"gradient shape {g.shape} does not match {constraint.shape}")
        return lmo_l1(g, constraint.radius)
    if isinstance(constraint, VertexPolytope):
        return lmo_vertices(g, constraint.vertices)
    if isinstance(constraint, TraceNormBall):
        if g.shape != constraint.shape:
            raise ShapeMismatchError(f"gradient shape {g.shape} does not match {constraint.shape}")
        return lmo_trace(g, constraint.radius, constraint.power_iter)
    raise TypeError(f"unknown constraint set {type(constraint).__name__}")
