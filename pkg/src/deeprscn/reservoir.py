"""Reservoir state machinery shared by every model family.

Layers are described by :class:`LayerParams` and driven column-by-column by an
input matrix of shape ``(K, n)``. States are returned with the same column
convention, ``(N, n)``, so ``states[:, n]`` is the reservoir state at step n.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np
from scipy.special import expit


class ShapeError(ValueError):
    """Raised when array dimensions do not agree."""


class NilpotentMatrixError(ValueError):
    """Raised when a matrix has spectral radius zero and cannot be rescaled."""


class Activation(str, enum.Enum):
    TANH = "tanh"
    SIGMOID = "sigmoid"

    @property
    def ufunc(self) -> np.ufunc:
        return np.tanh if self is Activation.TANH else expit

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return self.ufunc(x)


@dataclass(frozen=True)
class LayerParams:
    """Weights of one reservoir layer.

    Attributes:
        w_in: Input weights, shape ``(N, K_layer)``.
        w_r: Recurrent weights, shape ``(N, N)``.
        bias: Bias vector, shape ``(N,)``.
        activation: Node nonlinearity.
        triangular: True for layers grown node-by-node, whose recurrent matrix
            must stay lower-triangular. ESN layers set this to False.
    """

    w_in: np.ndarray
    w_r: np.ndarray
    bias: np.ndarray
    activation: Activation = Activation.TANH
    triangular: bool = True

    def __post_init__(self):
        w_in = np.atleast_2d(np.asarray(self.w_in, dtype=float))
        w_r = np.atleast_2d(np.asarray(self.w_r, dtype=float))
        bias = np.asarray(self.bias, dtype=float).reshape(-1)
        n = w_in.shape[0]
        if n < 1:
            raise ShapeError("a layer needs at least one node")
        if w_r.shape != (n, n):
            raise ShapeError(f"w_r has shape {w_r.shape}, expected {(n, n)}")
        if bias.shape != (n,):
            raise ShapeError(f"bias has length {bias.size}, expected {n}")
        if not (np.all(np.isfinite(w_in)) and np.all(np.isfinite(w_r)) and np.all(np.isfinite(bias))):
            raise ValueError("layer weights must be finite")
        if self.triangular and np.any(np.triu(w_r, k=1)):
            raise ValueError("w_r of a triangular layer has nonzero entries above the diagonal")
        for name, arr in (("w_in", w_in), ("w_r", w_r), ("bias", bias)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "activation", Activation(self.activation))

    @property
    def size(self) -> int:
        return self.w_in.shape[0]

    @property
    def input_dim(self) -> int:
        return self.w_in.shape[1]

    def truncated(self, n_nodes: int) -> LayerParams:
        """Return the layer restricted to its first ``n_nodes`` nodes."""
        return LayerParams(
            self.w_in[:n_nodes],
            self.w_r[:n_nodes, :n_nodes],
            self.bias[:n_nodes],
            self.activation,
            self.triangular,
        )


@dataclass(frozen=True)
class StateTrace:
    states: np.ndarray
    initial_state: np.ndarray = field(default=None)

    def __post_init__(self):
        if self.initial_state is None:
            object.__setattr__(self, "initial_state", np.zeros(self.states.shape[0]))

    @property
    def size(self) -> int:
        return self.states.shape[0]


def _as_inputs(inputs) -> np.ndarray:
    inputs = np.asarray(inputs, dtype=float)
    if inputs.ndim == 1:
        inputs = inputs[None, :]
    if inputs.ndim != 2:
        raise ShapeError("inputs must be a (K, n) matrix")
    return inputs


def rollout_layer(params: LayerParams, inputs, initial_state=None) -> StateTrace:
    """Drive a layer with ``inputs`` of shape ``(K, n)`` and record its states."""
    inputs = _as_inputs(inputs)
    if inputs.shape[0] != params.input_dim:
        raise ShapeError(f"layer expects {params.input_dim} input rows, got {inputs.shape[0]}")
    n_nodes = params.size
    x = np.zeros(n_nodes) if initial_state is None else np.asarray(initial_state, dtype=float).copy()
    if x.shape != (n_nodes,):
        raise ShapeError(f"initial_state must have length {n_nodes}")
    x0 = x.copy()

    drive = params.w_in @ inputs + params.bias[:, None]
    states = np.empty((n_nodes, inputs.shape[1]))
    g = params.activation
    w_r = params.w_r
    for t in range(inputs.shape[1]):
        x = g(drive[:, t] + w_r @ x)
        states[:, t] = x
    return StateTrace(states, x0)


def rollout_candidates(
    existing_states,
    inputs,
    w_in_rows,
    w_r_rows,
    biases,
    activation: Activation = Activation.TANH,
) -> np.ndarray:
    """Roll out a batch of candidate nodes appended to an existing layer.

    Each candidate c reads the layer inputs, the previous states of every
    existing node, and its own previous state. Existing nodes never read the
    candidate, so their states are reused as-is.

    Args:
        existing_states: ``(N, n)`` states of the current nodes (N may be 0).
        inputs: ``(K, n)`` layer inputs.
        w_in_rows: ``(C, K)`` candidate input weights.
        w_r_rows: ``(C, N + 1)`` candidate recurrent weights; the last column
            is the self-connection.
        biases: ``(C,)`` candidate biases.

    Returns:
        ``(C, n)`` candidate state sequences.
    """
    inputs = _as_inputs(inputs)
    n_steps = inputs.shape[1]
    if isinstance(existing_states, StateTrace):
        existing_states = existing_states.states
    if existing_states is None or np.size(existing_states) == 0:
        existing = np.zeros((0, n_steps))
    else:
        existing = np.atleast_2d(np.asarray(existing_states, dtype=float))
    w_in_rows = np.atleast_2d(np.asarray(w_in_rows, dtype=float))
    w_r_rows = np.atleast_2d(np.asarray(w_r_rows, dtype=float))
    biases = np.asarray(biases, dtype=float).reshape(-1)
    n_cand = w_in_rows.shape[0]
    n_nodes = existing.shape[0]
    if existing.shape[1] != n_steps:
        raise ShapeError("existing states and inputs disagree on the number of steps")
    if w_in_rows.shape[1] != inputs.shape[0]:
        raise ShapeError(f"w_in rows have length {w_in_rows.shape[1]}, inputs have {inputs.shape[0]} rows")
    if w_r_rows.shape != (n_cand, n_nodes + 1):
        raise ShapeError(f"w_r rows must have shape {(n_cand, n_nodes + 1)}, got {w_r_rows.shape}")
    if biases.shape != (n_cand,):
        raise ShapeError("need one bias per candidate")

    drive = w_in_rows @ inputs + biases[:, None]
    if n_nodes:
        # x_k(t-1) with the zero initial state at t = 0
        drive[:, 1:] += w_r_rows[:, :n_nodes] @ existing[:, :-1]
    self_w = w_r_rows[:, n_nodes]
    g = Activation(activation).ufunc
    # time-major so each step touches one contiguous row, updated in place
    out = np.ascontiguousarray(drive.T)
    buf = np.empty(n_cand)
    g(out[0], out=out[0])
    for t in range(1, n_steps):
        np.multiply(self_w, out[t - 1], out=buf)
        buf += out[t]
        g(buf, out=out[t])
    return out.T


def rollout_new_node(existing_trace, inputs, w_in_row, w_r_row, bias_scalar, activation=Activation.TANH) -> np.ndarray:
    """State sequence of a single node appended to a layer (see :func:`rollout_candidates`)."""
    w_in_row = np.asarray(w_in_row, dtype=float).reshape(1, -1)
    w_r_row = np.asarray(w_r_row, dtype=float).reshape(1, -1)
    return rollout_candidates(existing_trace, inputs, w_in_row, w_r_row, [bias_scalar], activation)[0]


def spectral_radius(w) -> float:
    return float(np.max(np.abs(np.linalg.eigvals(np.asarray(w, dtype=float)))))


def spectral_rescale(w, target_rho: float) -> np.ndarray:
    """Scale ``w`` so that its spectral radius equals ``target_rho``."""
    if target_rho <= 0:
        raise ValueError("target spectral radius must be positive")
    w = np.asarray(w, dtype=float)
    if w.ndim != 2 or w.shape[0] != w.shape[1]:
        raise ShapeError("spectral_rescale needs a square matrix")
    rho = spectral_radius(w)
    if rho <= np.finfo(float).eps * max(1.0, np.abs(w).max(initial=0.0)):
        raise NilpotentMatrixError("matrix has zero spectral radius; resample it")
    return w * (target_rho / rho)


def sparse_uniform_matrix(rows: int, cols: int, density: float, scale: float, rng: np.random.Generator) -> np.ndarray:
    """Dense matrix with ``ceil(density * rows * cols)`` entries drawn from U[-scale, scale].

    Positions are chosen uniformly without replacement; every other entry is
    exactly zero.
    """
    if rows < 1 or cols < 1:
        raise ValueError("rows and cols must be positive")
    if not 0 < density <= 1:
        raise ValueError("density must lie in (0, 1]")
    if scale <= 0:
        raise ValueError("scale must be positive")
    total = rows * cols
    count = min(total, int(np.ceil(density * total - 1e-9)))
    if count < 1:
        raise ValueError("density * rows * cols must be at least 1")
    out = np.zeros(total)
    if count == total:
        out[:] = rng.uniform(-scale, scale, size=total)
    else:
        positions = rng.choice(total, size=count, replace=False)
        out[positions] = rng.uniform(-scale, scale, size=count)
    return out.reshape(rows, cols)
