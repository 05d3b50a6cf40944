"""Exact finite categorical probability primitives.

All quantities are in nats. The convention ``0 * ln 0 = 0`` is used
throughout, and absolute-continuity violations in a KL divergence are raised
as :class:`SupportError` instead of returning infinity.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import special

NORMALIZATION_TOL = 1e-12
RENORMALIZE_TOL = 1e-9


class ProbabilityError(ValueError):
    """Base class for invalid probabilistic input."""


class DimensionError(ProbabilityError):
    pass


class NormalizationError(ProbabilityError):
    pass


class SupportError(ProbabilityError):
    """``p_i > 0`` where ``q_i = 0`` inside a KL divergence or log-expectation."""


def as_probs(x, name="distribution"):
    """Validate ``x`` as one or more categorical rows along the last axis.

    Rows whose sum is within ``RENORMALIZE_TOL`` of one are divided by their
    sum; anything further off is rejected.
    """
    arr = np.array(x, dtype=np.float64)
    if arr.ndim == 0 or arr.shape[-1] < 1:
        raise DimensionError(f"{name}: needs at least one outcome")
    if not np.all(np.isfinite(arr)):
        raise NormalizationError(f"{name}: non-finite probability")
    if np.any(arr < 0):
        raise NormalizationError(f"{name}: negative probability")
    sums = arr.sum(axis=-1, keepdims=True)
    bad = np.abs(sums - 1.0) > RENORMALIZE_TOL
    if np.any(bad):
        worst = float(np.max(np.abs(sums - 1.0)))
        raise NormalizationError(f"{name}: rows must sum to 1 (max deviation {worst:.3g})")
    arr = arr / sums
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Categorical:
    """Immutable probability vector over ``dim`` outcomes."""

    probs: np.ndarray

    def __post_init__(self):
        probs = as_probs(self.probs, "Categorical")
        if probs.ndim != 1:
            raise DimensionError("Categorical must be one-dimensional")
        object.__setattr__(self, "probs", probs)

    @classmethod
    def uniform(cls, n: int) -> "Categorical":
        return cls(np.full(n, 1.0 / n))

    @classmethod
    def point(cls, n: int, index: int) -> "Categorical":
        p = np.zeros(n)
        p[index] = 1.0
        return cls(p)

    @property
    def dim(self) -> int:
        return self.probs.shape[0]

    def __len__(self):
        return self.dim

    def __array__(self, dtype=None, copy=None):
        return self.probs if dtype is None else self.probs.astype(dtype)

    def __getitem__(self, i):
        return self.probs[i]

    def __repr__(self):
        return f"Categorical({np.array2string(self.probs, precision=6)})"


@dataclass(frozen=True, eq=False)
class LogWeights:
    """Unnormalised log-potentials. ``-inf`` encodes zero probability."""

    values: np.ndarray

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).reshape(-1)
        if v.size == 0:
            raise DimensionError("LogWeights needs at least one entry")
        if np.any(np.isnan(v)) or np.any(v == np.inf):
            raise ProbabilityError("LogWeights must not contain NaN or +inf")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)

    def __array__(self, dtype=None, copy=None):
        return self.values if dtype is None else self.values.astype(dtype)

    def __len__(self):
        return self.values.shape[0]


def _vec(p) -> np.ndarray:
    if isinstance(p, Categorical):
        return p.probs
    return as_probs(p)


def _logw(w) -> np.ndarray:
    v = LogWeights(w).values if not isinstance(w, LogWeights) else w.values
    if np.all(v == -np.inf):
        raise ProbabilityError("all log-weights are -inf")
    return v


def kl_divergence(p, q) -> float:
    """``sum_i p_i ln(p_i / q_i)`` in nats.

    Raises
    ------
    DimensionError
        If ``p`` and ``q`` differ in length.
    SupportError
        If some ``p_i > 0`` has ``q_i = 0``.
    """
    p, q = _vec(p), _vec(q)
    if p.shape != q.shape:
        raise DimensionError(f"KL between dimensions {p.shape[0]} and {q.shape[0]}")
    if np.any((p > 0) & (q == 0)):
        raise SupportError("KL divergence: p is not absolutely continuous w.r.t. q")
    return float(np.sum(special.rel_entr(p, q)))


def entropy(p) -> float:
    """Shannon entropy ``-sum p ln p`` in nats."""
    return float(np.sum(special.entr(_vec(p))))


def log_sum_exp(w) -> float:
    """Stable ``ln sum exp(w_i)``."""
    return float(special.logsumexp(_logw(w)))


def softmax(w) -> Categorical:
    """Normalise log-weights into a :class:`Categorical`. Shift invariant."""
    v = _logw(w)
    return Categorical(np.exp(v - special.logsumexp(v)))


def row_entropy(matrix) -> np.ndarray:
    """Entropy of every row of a row-stochastic matrix."""
    return np.sum(special.entr(np.asarray(matrix, dtype=np.float64)), axis=-1)
