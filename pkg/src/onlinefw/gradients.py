"""Gradient oracles for the observation stream.

Each oracle produces the surrogate gradient of the running-average loss
``F_t(theta) = t^-1 sum_{s<=t} f_s(theta)`` at an arbitrary query point.
For squared-error regression and exponential-family matrix observations the
average collapses onto sufficient statistics, so the per-round update and the
gradient query both cost time independent of ``t``. General losses (the
sigmoid and logistic classifiers) fall back to replaying the stored samples.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .exceptions import NoDataError, ShapeMismatchError

# Exponent clamp for mean functions that blow up (Poisson, logistic extremes).
LINK_EXP_CLAMP = 50.0

# Steepness of the 0/1-loss surrogate.
SIGMOID_STEEPNESS = 10.0


# ---------------------------------------------------------------------------
# Samples
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LassoSample:
    """One regression observation: design block ``A`` (m x n) and response ``y`` (m)."""

    A: np.ndarray
    y: np.ndarray


@dataclass(frozen=True)
class McSample:
    """One matrix entry observation at (row, col)."""

    row: int
    col: int
    value: float


@dataclass(frozen=True)
class LabeledVector:
    """A binary-classification sample: features (any shape) and label in {-1, +1}."""

    features: np.ndarray
    label: int


# ---------------------------------------------------------------------------
# Exponential-family links
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinkFunction:
    """Log-partition ``g`` and mean function ``g'`` of a natural exponential family."""

    name: str
    log_partition: Callable[[np.ndarray], np.ndarray]
    mean: Callable[[np.ndarray], np.ndarray]


def _clamped_exp(x):
    return np.exp(np.clip(x, -LINK_EXP_CLAMP, LINK_EXP_CLAMP))


GAUSSIAN = LinkFunction("gaussian", lambda x: 0.5 * np.square(x), lambda x: np.asarray(x, dtype=float))
LOGISTIC = LinkFunction("logistic", lambda x: np.logaddexp(0.0, x), expit)
POISSON = LinkFunction("poisson", _clamped_exp, _clamped_exp)

LINKS = {link.name: link for link in (GAUSSIAN, LOGISTIC, POISSON)}


# ---------------------------------------------------------------------------
# Online LASSO sufficient statistics
# ---------------------------------------------------------------------------


class LassoStats:
    """Running means of ``A^T A`` and ``A^T y`` for squared-error streams.

    The surrogate gradient at ``theta`` is ``mean(A^T A) theta - mean(A^T y)``.
    A fixed design (the same ``A`` object every round) is detected by identity
    and its Gram matrix is computed once.
    """

    def __init__(self, dim: int):
        self.dim = dim
        self.gram = np.zeros((dim, dim))
        self.moment = np.zeros(dim)
        self.count = 0
        self._cached_design = None
        self._cached_gram = None

    def observe(self, sample: LassoSample) -> None:
        A, y = sample.A, sample.y
        if A.ndim != 2 or A.shape[1] != self.dim or y.shape != (A.shape[0],):
            raise ShapeMismatchError(
                f"sample of design {A.shape} / response {y.shape} does not fit dim {self.dim}"
            )
        if A is self._cached_design:
            gram = self._cached_gram
        else:
            gram = A.T @ A
            self._cached_design = A
            self._cached_gram = gram
        self.count += 1
        w = 1.0 / self.count
        self.gram *= 1.0 - w
        self.gram += w * gram
        self.moment *= 1.0 - w
        self.moment += w * (A.T @ y)

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        if self.count == 0:
            raise NoDataError("gradient requested before any sample")
        if theta.shape != (self.dim,):
            raise ShapeMismatchError(f"query point shape {theta.shape} does not fit dim {self.dim}")
        return self.gram @ theta - self.moment


# ---------------------------------------------------------------------------
# Online matrix-completion sufficient statistics
# ---------------------------------------------------------------------------


class McStats:
    """Per-cell response sums and visit counts for entrywise matrix streams.

    Dividing by the round count gives exactly the running means of
    ``y e_k e_l^T`` and ``e_k e_l^T``; the surrogate gradient is supported on
    the visited cells only, so memory stays ``O(min(m1 * m2, t))``.
    """

    def __init__(self, shape: tuple[int, int], link: LinkFunction = GAUSSIAN):
        self.shape = shape
        self.link = link
        self.count = 0
        self.saturation_count = 0
        self._index: dict[tuple[int, int], int] = {}
        self._rows: list[int] = []
        self._cols: list[int] = []
        self._value_sums: list[float] = []
        self._visits: list[int] = []

    def observe(self, sample: McSample) -> None:
        m1, m2 = self.shape
        if not (0 <= sample.row < m1 and 0 <= sample.col < m2):
            raise ShapeMismatchError(f"cell ({sample.row}, {sample.col}) outside {self.shape}")
        cell = (sample.row, sample.col)
        pos = self._index.get(cell)
        if pos is None:
            self._index[cell] = len(self._rows)
            self._rows.append(sample.row)
            self._cols.append(sample.col)
            self._value_sums.append(float(sample.value))
            self._visits.append(1)
        else:
            self._value_sums[pos] += float(sample.value)
            self._visits[pos] += 1
        self.count += 1

    @property
    def support_size(self) -> int:
        return len(self._rows)

    def _support_arrays(self):
        rows = np.asarray(self._rows, dtype=np.intp)
        cols = np.asarray(self._cols, dtype=np.intp)
        value_sums = np.asarray(self._value_sums)
        visits = np.asarray(self._visits, dtype=float)
        return rows, cols, value_sums, visits

    def value_mean(self) -> sp.coo_array:
        """Running mean of ``y e_k e_l^T`` as a sparse matrix."""
        if self.count == 0:
            return sp.coo_array(self.shape)
        rows, cols, value_sums, _ = self._support_arrays()
        return sp.coo_array((value_sums / self.count, (rows, cols)), shape=self.shape)

    def visit_mean(self) -> sp.coo_array:
        """Running mean of ``e_k e_l^T`` (empirical sampling frequencies)."""
        if self.count == 0:
            return sp.coo_array(self.shape)
        rows, cols, _, visits = self._support_arrays()
        return sp.coo_array((visits / self.count, (rows, cols)), shape=self.shape)

    def gradient(self, theta: np.ndarray) -> sp.csr_array:
        """Surrogate gradient ``g'(theta_kl) * freq_kl - value_mean_kl`` on the support."""
        if self.count == 0:
            raise NoDataError("gradient requested before any sample")
        if theta.shape != self.shape:
            raise ShapeMismatchError(f"query point shape {theta.shape} does not fit {self.shape}")
        rows, cols, value_sums, visits = self._support_arrays()
        entries = theta[rows, cols]
        if self.link.name != "gaussian" and np.any(np.abs(entries) > LINK_EXP_CLAMP):
            self.saturation_count += 1
        vals = (self.link.mean(entries) * visits - value_sums) / self.count
        return sp.csr_array(sp.coo_array((vals, (rows, cols)), shape=self.shape))


# ---------------------------------------------------------------------------
# Replay aggregator for general losses
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SigmoidLoss:
    """``(1 + exp(scale * y <theta, x>))^-1``, a smooth surrogate of the 0/1 loss."""

    scale: float = SIGMOID_STEEPNESS


@dataclass(frozen=True)
class LogisticLoss:
    """``log(1 + exp(-y <theta, x>))``."""


LossKind = SigmoidLoss | LogisticLoss


class ReplayStats:
    """Append-only sample store; gradients replay the whole history.

    The query cost grows linearly with the number of stored samples, which is
    the honest price of a loss without sufficient statistics. Features of any
    shape are stored flattened; gradients come back in the declared shape.
    """

    def __init__(self, feature_shape: tuple[int, ...], loss: LossKind = SigmoidLoss()):
        self.feature_shape = feature_shape
        self.loss = loss
        self.count = 0
        dim = int(np.prod(feature_shape))
        self._dim = dim
        self._features = np.empty((16, dim))
        self._labels = np.empty(16)

    def observe(self, sample: LabeledVector) -> None:
        x = np.asarray(sample.features, dtype=float)
        if x.shape != self.feature_shape:
            raise ShapeMismatchError(f"feature shape {x.shape} does not fit {self.feature_shape}")
        if sample.label not in (-1, 1):
            raise ValueError(f"label must be -1 or +1, got {sample.label}")
        if self.count == self._features.shape[0]:
            self._features = np.concatenate([self._features, np.empty_like(self._features)])
            self._labels = np.concatenate([self._labels, np.empty_like(self._labels)])
        self._features[self.count] = x.ravel()
        self._labels[self.count] = sample.label
        self.count += 1

    def _margins(self, theta: np.ndarray):
        if self.count == 0:
            raise NoDataError("no samples observed yet")
        if theta.shape != self.feature_shape:
            raise ShapeMismatchError(f"query point shape {theta.shape} does not fit {self.feature_shape}")
        X = self._features[: self.count]
        y = self._labels[: self.count]
        return X, y, X @ theta.ravel()

    def loss_value(self, theta: np.ndarray) -> float:
        """Average stored loss at ``theta`` (the aggregated objective)."""
        X, y, u = self._margins(theta)
        if isinstance(self.loss, SigmoidLoss):
            return float(np.mean(expit(-self.loss.scale * y * u)))
        return float(np.mean(np.logaddexp(0.0, -y * u)))

    def gradient(self, theta: np.ndarray) -> np.ndarray:
        X, y, u = self._margins(theta)
        if isinstance(self.loss, SigmoidLoss):
            s = self.loss.scale
            f = expit(-s * y * u)
            coeff = -s * y * f * (1.0 - f)
        else:
            coeff = -y * expit(-y * u)
        flat = (coeff @ X) / self.count
        return flat.reshape(self.feature_shape)


GradientOracle = LassoStats | McStats | ReplayStats


def oracle_gradient(oracle: GradientOracle, theta: np.ndarray):
    """Uniform gradient query across the three aggregator kinds."""
    if oracle.count == 0:
        raise NoDataError("oracle has not observed any sample")
    return oracle.gradient(theta)
