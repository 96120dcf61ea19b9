"""Shared domain types: iterates, atoms, active sets, and step schedules.

The iterate is a plain numpy array (a vector or a matrix). Atoms are compact
descriptions of extreme points of the feasible set; an active set is the
convex-combination decomposition of the iterate that the away-step solver
maintains. The weight algebra implemented here is the unique multiplicative
update consistent with keeping the decomposition exact under the iterate
updates ``theta + gamma * (a - theta)`` and ``theta + gamma * (theta - b)``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ShapeMismatchError, StepBoundError

# Weights at or below this are treated as zero and removed from active sets.
PURGE_THRESHOLD = 1e-12

# Slack used when comparing an away step against its feasibility bound.
GAMMA_MAX_SLACK = 1e-12

Shape = tuple[int, ...]

_rank_one_serial = itertools.count()


def zeros(shape: Shape) -> np.ndarray:
    """Zero element of a vector or matrix parameter space."""
    if len(shape) not in (1, 2) or any(s <= 0 for s in shape):
        raise ShapeMismatchError(f"parameter shape must be (n,) or (m1, m2), got {shape}")
    return np.zeros(shape)


# ---------------------------------------------------------------------------
# Atoms
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SignedBasis:
    """The point ``sign * radius * e_index`` of a scaled l1 ball."""

    index: int
    sign: int
    radius: float

    def key(self):
        return (self.index, self.sign)

    def point(self, shape: Shape) -> np.ndarray:
        if len(shape) != 1 or self.index >= shape[0]:
            raise ShapeMismatchError(f"basis atom index {self.index} incompatible with {shape}")
        out = np.zeros(shape)
        out[self.index] = self.sign * self.radius
        return out

    def dot(self, g: np.ndarray) -> float:
        return self.sign * self.radius * float(g[self.index])

    def add_to(self, out: np.ndarray, coeff: float) -> None:
        out[self.index] += coeff * self.sign * self.radius


@dataclass(frozen=True)
class Vertex:
    """A row of an explicit vertex table; ``vertex_id`` is its 0-based position."""

    vertex_id: int
    coords: np.ndarray = field(compare=False, repr=False)

    def key(self):
        return self.vertex_id

    def point(self, shape: Shape) -> np.ndarray:
        if self.coords.shape != shape:
            raise ShapeMismatchError(f"vertex of shape {self.coords.shape} incompatible with {shape}")
        return self.coords.copy()

    def dot(self, g: np.ndarray) -> float:
        return float(self.coords @ g)

    def add_to(self, out: np.ndarray, coeff: float) -> None:
        out += coeff * self.coords


@dataclass(frozen=True)
class RankOne:
    """The matrix ``(-1 if negated else 1) * radius * u v^T`` with unit u, v.

    Rank-one atoms are never deduplicated: every instance gets a fresh serial
    so that two numerically identical outputs of the eigensolver remain
    distinct entries in bookkeeping.
    """

    u: np.ndarray = field(compare=False, repr=False)
    v: np.ndarray = field(compare=False, repr=False)
    radius: float
    negated: bool = True
    serial: int = field(default_factory=lambda: next(_rank_one_serial))

    def __post_init__(self):
        for name, vec in (("u", self.u), ("v", self.v)):
            if abs(np.linalg.norm(vec) - 1.0) > 1e-9:
                raise ValueError(f"rank-one factor {name} is not a unit vector")

    def key(self):
        return ("r1", self.serial)

    @property
    def _scale(self) -> float:
        return -self.radius if self.negated else self.radius

    def point(self, shape: Shape) -> np.ndarray:
        if shape != (self.u.shape[0], self.v.shape[0]):
            raise ShapeMismatchError(f"rank-one atom incompatible with {shape}")
        return self._scale * np.outer(self.u, self.v)

    def dot(self, g) -> float:
        # <radius * u v^T, G> = radius * u^T G v; works for dense and sparse G.
        return self._scale * float(self.u @ (g @ self.v))

    def add_to(self, out: np.ndarray, coeff: float) -> None:
        out += (coeff * self._scale) * np.outer(self.u, self.v)


Atom = SignedBasis | Vertex | RankOne


# ---------------------------------------------------------------------------
# Step schedules
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Harmonic:
    """Schedule ``K / (K + n - 1)``; the first step is always 1."""

    K: int = 2

    def __post_init__(self):
        if self.K < 1:
            raise ValueError("K must be a positive integer")

    def value(self, n: int) -> float:
        return self.K / (self.K + n - 1)


@dataclass(frozen=True)
class Power:
    """Schedule ``n ** -alpha`` with alpha in [0.5, 1)."""

    alpha: float = 0.75

    def __post_init__(self):
        if not 0.5 <= self.alpha < 1.0:
            raise ValueError("alpha must lie in [0.5, 1)")

    def value(self, n: int) -> float:
        return float(n) ** -self.alpha


StepSchedule = Harmonic | Power


def step_size(schedule: StepSchedule, n: int) -> float:
    """Step size at solver-step count ``n`` (1-based)."""
    if n < 1:
        raise ValueError(f"step count must be >= 1, got {n}")
    return schedule.value(n)


# ---------------------------------------------------------------------------
# Active set
# ---------------------------------------------------------------------------


class ActiveSet:
    """Convex-combination decomposition ``theta = sum_a weight_a * a``.

    Entries are keyed by the atom's canonical key; weights stay strictly
    positive and sum to one whenever the set is non-empty. Updates mutate the
    set in place; ``copy()`` gives an independent snapshot.
    """

    __slots__ = ("_atoms", "_weights")

    def __init__(self):
        self._atoms: dict = {}
        self._weights: dict = {}

    def __len__(self) -> int:
        return len(self._atoms)

    def __contains__(self, key) -> bool:
        return key in self._atoms

    def atoms(self):
        return self._atoms.values()

    def keys(self):
        return self._atoms.keys()

    def weights(self):
        return self._weights.values()

    def items(self):
        for k, atom in self._atoms.items():
            yield atom, self._weights[k]

    def weight(self, key) -> float:
        return self._weights[key]

    def atom(self, key) -> Atom:
        return self._atoms[key]

    def copy(self) -> "ActiveSet":
        out = ActiveSet()
        out._atoms = dict(self._atoms)
        out._weights = dict(self._weights)
        return out

    def point(self, shape: Shape) -> np.ndarray:
        """Reconstruct the iterate; the empty set reconstructs to zero."""
        out = zeros(shape)
        for k, atom in self._atoms.items():
            atom.add_to(out, self._weights[k])
        return out

    def gamma_max(self, away_key) -> float:
        """Largest feasible away step ``alpha / (1 - alpha)`` for the keyed atom."""
        alpha = self._weights[away_key]
        if alpha >= 1.0:
            raise StepBoundError("away step undefined for a single-atom active set (weight 1)")
        return alpha / (1.0 - alpha)

    def apply_fw_step(self, atom: Atom, gamma: float) -> "ActiveSet":
        """Scale every weight by ``1 - gamma`` and give ``gamma`` to ``atom``."""
        if not 0.0 < gamma <= 1.0:
            raise ValueError(f"fw step size must lie in (0, 1], got {gamma}")
        if gamma == 1.0:
            self._atoms.clear()
            self._weights.clear()
            key = atom.key()
            self._atoms[key] = atom
            self._weights[key] = 1.0
            return self
        scale = 1.0 - gamma
        weights = self._weights
        for k in weights:
            weights[k] *= scale
        key = atom.key()
        if key in weights:
            weights[key] += gamma
        else:
            self._atoms[key] = atom
            weights[key] = gamma
        self._purge()
        return self

    def apply_away_step(self, away_key, gamma: float) -> "ActiveSet":
        """Scale every weight by ``1 + gamma`` and take ``gamma`` from the away atom.

        A step within ``GAMMA_MAX_SLACK`` of ``gamma_max`` zeroes the away
        atom's weight exactly and removes it (a drop); anything beyond that
        bound would leave the feasible set and raises ``StepBoundError``.
        """
        if gamma <= 0.0:
            raise ValueError(f"away step size must be positive, got {gamma}")
        gmax = self.gamma_max(away_key)
        if gamma > gmax + GAMMA_MAX_SLACK:
            raise StepBoundError(f"away step {gamma} exceeds gamma_max {gmax}")
        dropping = gamma >= gmax - GAMMA_MAX_SLACK
        scale = 1.0 + gamma
        weights = self._weights
        for k in weights:
            weights[k] *= scale
        if dropping:
            del self._atoms[away_key]
            del weights[away_key]
        else:
            weights[away_key] -= gamma
        self._purge()
        # The exact algebra preserves a unit sum; large gamma values cancel
        # catastrophically in float, so fold the rounding residue back in.
        total = sum(weights.values())
        if total > 0.0 and total != 1.0:
            inv = 1.0 / total
            for k in weights:
                weights[k] *= inv
        return self

    def _purge(self) -> None:
        dead = [k for k, w in self._weights.items() if w <= PURGE_THRESHOLD]
        for k in dead:
            del self._atoms[k]
            del self._weights[k]


def active_set_point(active: ActiveSet, shape: Shape) -> np.ndarray:
    return active.point(shape)


def gamma_max(active: ActiveSet, away_key) -> float:
    return active.gamma_max(away_key)


def apply_fw_step(active: ActiveSet, atom: Atom, gamma: float) -> ActiveSet:
    return active.apply_fw_step(atom, gamma)


def apply_away_step(active: ActiveSet, away_key, gamma: float) -> ActiveSet:
    return active.apply_away_step(away_key, gamma)
