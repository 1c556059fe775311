"""Linear readouts: batch least squares and online projection updates."""

from __future__ import annotations

from dataclasses import dataclass, field
from itertools import zip_longest
from typing import Iterable, Sequence

import numpy as np
from scipy.linalg import solve_triangular

from .reservoir import ShapeError

#: Relative cutoff below which singular values are treated as zero.
RCOND = 1e-10


@dataclass(frozen=True)
class ReadoutWeights:
    """Output weights ``w_out`` of shape ``(L, M)``.

    ``feature_layout`` labels contiguous column blocks, e.g.
    ``(("layer1", 25), ("layer2", 25))``; its widths must add up to M.
    """

    w_out: np.ndarray
    feature_layout: tuple = field(default=())

    def __post_init__(self):
        w = np.atleast_2d(np.asarray(self.w_out, dtype=float))
        object.__setattr__(self, "w_out", w)
        layout = tuple((str(name), int(width)) for name, width in self.feature_layout)
        if layout and sum(width for _, width in layout) != w.shape[1]:
            raise ShapeError(f"feature layout covers {sum(w for _, w in layout)} columns, weights have {w.shape[1]}")
        object.__setattr__(self, "feature_layout", layout)

    @property
    def n_outputs(self) -> int:
        return self.w_out.shape[0]

    @property
    def n_features(self) -> int:
        return self.w_out.shape[1]

    def apply(self, features: np.ndarray) -> np.ndarray:
        """Map a ``(M, n)`` feature matrix (or a length-M vector) to outputs."""
        features = np.asarray(features, dtype=float)
        if features.shape[0] != self.n_features:
            raise ShapeError(f"expected {self.n_features} feature rows, got {features.shape[0]}")
        return self.w_out @ features

    @classmethod
    def zeros(cls, n_outputs: int, n_features: int, feature_layout=()) -> ReadoutWeights:
        return cls(np.zeros((n_outputs, n_features)), feature_layout)


def _as_rows(a, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ShapeError(f"{name} must be 2-D")
    return a


def solve_least_squares(features, targets, feature_layout=(), rcond: float = RCOND) -> ReadoutWeights:
    """Minimum-norm W minimising ``||targets - W @ features||_F``.

    Args:
        features: ``(M, n)`` feature matrix, one column per time step.
        targets: ``(L, n)`` target matrix.

    Raises:
        ShapeError: if the column counts differ.
        ValueError: on empty or non-finite input.
    """
    x = _as_rows(features, "features")
    t = _as_rows(targets, "targets")
    if x.shape[1] != t.shape[1]:
        raise ShapeError(f"features have {x.shape[1]} columns, targets {t.shape[1]}")
    if x.shape[1] < 1:
        raise ValueError("need at least one sample")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(t))):
        raise ValueError("features and targets must be finite")
    # lstsq solves A @ B = C with A = x.T (n, M), C = t.T (n, L)
    w_t, *_ = np.linalg.lstsq(x.T, t.T, rcond=rcond)
    return ReadoutWeights(w_t.T, feature_layout)


def readout_apply(weights: ReadoutWeights, feature_column) -> np.ndarray:
    g = np.asarray(feature_column, dtype=float).reshape(-1)
    if g.size != weights.n_features:
        raise ShapeError(f"feature vector has length {g.size}, expected {weights.n_features}")
    return weights.w_out @ g


@dataclass(frozen=True)
class ProjectionConfig:
    """Gain ``a`` in (0, 1] and denominator regulariser ``c`` > 0."""

    a: float = 1.0
    c: float = 1e-4

    def __post_init__(self):
        if not 0 < self.a <= 1:
            raise ValueError(f"projection gain a must lie in (0, 1], got {self.a}")
        if not self.c > 0:
            raise ValueError(f"projection regulariser c must be positive, got {self.c}")


def projection_update(weights: ReadoutWeights, g_n, observed, cfg: ProjectionConfig) -> ReadoutWeights:
    """One step of the regularised projection algorithm.

    ``W(n) = W(n-1) + a * (y - W(n-1) g) g^T / (c + g^T g)`` where ``y`` is the
    measured target at step n.
    """
    g = np.asarray(g_n, dtype=float).reshape(-1)
    y = np.asarray(observed, dtype=float).reshape(-1)
    if g.size != weights.n_features:
        raise ShapeError(f"feature vector has length {g.size}, expected {weights.n_features}")
    if y.size != weights.n_outputs:
        raise ShapeError(f"observation has length {y.size}, expected {weights.n_outputs}")
    innovation = y - weights.w_out @ g
    w = weights.w_out + (cfg.a / (cfg.c + g @ g)) * np.outer(innovation, g)
    return ReadoutWeights(w, weights.feature_layout)


@dataclass
class OnlineResult:
    predictions: np.ndarray
    weights: ReadoutWeights
    history: list = field(default_factory=list)


def online_run(
    features: Iterable | np.ndarray,
    targets: Iterable | np.ndarray,
    initial: ReadoutWeights,
    cfg: ProjectionConfig,
    keep_history: bool = False,
) -> OnlineResult:
    """Prequential online adaptation.

    At each step the output is predicted with the current weights, then the
    weights are updated with the observed target. Arrays are read column-wise
    (``(M, n)`` and ``(L, n)``); any other iterables are consumed one step at a
    time.

    Raises:
        ValueError: if one stream ends before the other.
    """
    if isinstance(features, np.ndarray):
        features = _as_rows(features, "features").T
    if isinstance(targets, np.ndarray):
        targets = _as_rows(targets, "targets").T
    missing = object()
    w = initial
    preds = []
    history: list[ReadoutWeights] = []
    for step, (g, y) in enumerate(zip_longest(features, targets, fillvalue=missing)):
        if g is missing or y is missing:
            raise ValueError(f"feature and target streams differ in length (detected at step {step})")
        preds.append(readout_apply(w, g))
        w = projection_update(w, g, y, cfg)
        if keep_history:
            history.append(w)
    pred = np.array(preds).T if preds else np.zeros((initial.n_outputs, 0))
    return OnlineResult(pred, w, history)


def layout_from_sizes(sizes: Sequence[int], prefix: str = "layer") -> tuple:
    return tuple((f"{prefix}{i + 1}", int(s)) for i, s in enumerate(sizes))


class IncrementalLeastSquares:
    """Least squares over a feature set that grows (and shrinks) one column at a time.

    Keeps a thin QR factorisation of the feature columns, so adding a column
    costs O(n M) instead of a fresh O(n M^2) solve. Columns that are
    numerically in the span of earlier ones get weight 0; the residual is the
    same as for the minimum-norm solution.

    Args:
        targets: ``(L, n)`` target matrix.
        dependence_tol: a column whose component orthogonal to the current
            span is below this fraction of its norm counts as dependent.
    """

    def __init__(self, targets, dependence_tol: float = 1e-10):
        t = _as_rows(targets, "targets")
        if not np.all(np.isfinite(t)):
            raise ValueError("targets must be finite")
        self.targets = t
        self.tol = dependence_tol
        self._q: list[np.ndarray] = []  # orthonormal basis vectors
        self._r_cols: list[np.ndarray] = []  # column j of R restricted to the basis at insertion time
        self._basis_of: list[int] = []  # basis index of each column, -1 if dependent
        self._coef: list[np.ndarray] = []  # q_k^T t for each basis vector, shape (L,)
        self.residual = t.copy()

    @property
    def n_columns(self) -> int:
        return len(self._basis_of)

    @property
    def rank(self) -> int:
        return len(self._q)

    def add_column(self, x) -> bool:
        """Append a feature column of length n; return False if it was dependent."""
        x = np.asarray(x, dtype=float).reshape(-1)
        if x.size != self.targets.shape[1]:
            raise ShapeError(f"column has {x.size} samples, targets have {self.targets.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValueError("features must be finite")
        norm_x = float(np.linalg.norm(x))
        v = x.copy()
        r = np.zeros(self.rank + 1)
        if self._q:
            q = np.array(self._q)
            # classical Gram-Schmidt, applied twice for stability
            for _ in range(2):
                c = q @ v
                v -= c @ q
                r[:-1] += c
        norm_v = float(np.linalg.norm(v))
        if norm_x == 0.0 or norm_v <= self.tol * norm_x:
            self._basis_of.append(-1)
            return False
        q_new = v / norm_v
        r[-1] = norm_v
        coef = self.targets @ q_new
        self._q.append(q_new)
        self._r_cols.append(r)
        self._coef.append(coef)
        self._basis_of.append(self.rank - 1)
        self.residual = self.residual - np.outer(coef, q_new)
        return True

    def truncate(self, n_columns: int) -> None:
        """Keep only the first ``n_columns`` columns."""
        if not 0 <= n_columns <= self.n_columns:
            raise ValueError(f"cannot truncate {self.n_columns} columns to {n_columns}")
        self._basis_of = self._basis_of[:n_columns]
        keep = sum(1 for b in self._basis_of if b >= 0)
        del self._q[keep:], self._r_cols[keep:], self._coef[keep:]
        if self._q:
            self.residual = self.targets - np.array(self._coef).T @ np.array(self._q)
        else:
            self.residual = self.targets.copy()

    def weights(self) -> np.ndarray:
        """``(L, M)`` weights; dependent columns get zeros."""
        out = np.zeros((self.targets.shape[0], self.n_columns))
        k = self.rank
        if k == 0:
            return out
        r = np.zeros((k, k))
        for j, col in enumerate(self._r_cols):
            r[: j + 1, j] = col
        w_basis = solve_triangular(r, np.array(self._coef), lower=False)  # (k, L)
        idx = [j for j, b in enumerate(self._basis_of) if b >= 0]
        out[:, idx] = w_basis.T
        return out
