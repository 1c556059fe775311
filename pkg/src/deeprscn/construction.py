"""Supervised incremental construction of (deep) recurrent stochastic configuration networks.

Nodes are added one at a time. Each new node is picked from a pool of random
candidates that pass an inequality test against the current training
residual, then the readout over every node built so far is refitted by least
squares. Once a layer is full, construction continues in a new layer driven
by the previous layer's states.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .datasets import TimeSeriesDataset
from .readout import IncrementalLeastSquares, ReadoutWeights
from .reservoir import (
    Activation,
    LayerParams,
    NilpotentMatrixError,
    ShapeError,
    rollout_candidates,
    rollout_layer,
    sparse_uniform_matrix,
    spectral_rescale,
)

logger = logging.getLogger(__name__)

#: Relative slack allowed when checking the residual-decrease inequalities.
CERT_RTOL = 1e-9


class ConfigurationError(RuntimeError):
    """No admissible candidate could be found, even after relaxing r."""

    def __init__(self, message, log=None):
        super().__init__(message)
        self.log = log or []


@dataclass(frozen=True)
class RscConfig:
    """Settings of the constructive algorithm.

    ``max_nodes`` holds the node budget of each layer; its length is the number
    of layers. The defaults for the search itself (candidate pool size, weight
    scales, contraction levels, tolerance, early-stop window and seed size)
    follow the published benchmark settings.
    """

    max_nodes: tuple = (50,)
    initial_reservoir_size: int = 5
    g_max: int = 100
    lambdas: tuple = (0.5, 1, 5, 10, 30, 50, 100)
    r_sequence: tuple = (0.9, 0.99, 0.999, 0.9999)
    tolerance: float = 1e-6
    n_step: int = 6
    density: float = 0.02
    max_relaxations: int = 10
    search_order: str = "scale"
    recurrent_density: float = 1.0
    early_stopping: bool = True
    concat_input: bool = False
    spectral_target: float | None = None
    activation: Activation = Activation.TANH
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "max_nodes", tuple(int(n) for n in np.atleast_1d(self.max_nodes)))
        object.__setattr__(self, "lambdas", tuple(float(v) for v in self.lambdas))
        object.__setattr__(self, "r_sequence", tuple(float(v) for v in self.r_sequence))
        object.__setattr__(self, "activation", Activation(self.activation))
        if not self.max_nodes or min(self.max_nodes) < 1:
            raise ValueError("every layer needs a positive node budget")
        if not 0 <= self.initial_reservoir_size <= self.max_nodes[0]:
            raise ValueError("initial_reservoir_size must lie in [0, max_nodes[0]]")
        if self.g_max < 1:
            raise ValueError("g_max must be at least 1")
        if not self.lambdas or min(self.lambdas) <= 0:
            raise ValueError("weight scales must be positive")
        if not self.r_sequence or not all(0 < r < 1 for r in self.r_sequence):
            raise ValueError("every r must lie in (0, 1)")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")
        if self.n_step < 1:
            raise ValueError("n_step must be at least 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if not 0 < self.recurrent_density <= 1:
            raise ValueError("recurrent_density must lie in (0, 1]")
        if self.search_order not in ("scale", "contraction"):
            raise ValueError("search_order must be 'scale' or 'contraction'")

    @property
    def layer_count(self) -> int:
        return len(self.max_nodes)


def mu_value(n_sum: int, r: float) -> float:
    """Slack term ``(1 - r) / (n_sum + 1)``: positive, at most ``1 - r``, vanishing."""
    if n_sum < 0:
        raise ValueError("n_sum must be non-negative")
    return (1.0 - r) / (n_sum + 1)


def n_sum_of(layer: int, nodes_in_layer: int, max_nodes: Sequence[int]) -> int:
    """Running node count when ``layer`` (1-based) holds ``nodes_in_layer`` nodes."""
    return int(sum(max_nodes[: layer - 1])) + nodes_in_layer


@dataclass
class CandidateNode:
    w_in_row: np.ndarray
    w_r_row: np.ndarray
    bias: float
    node_trace: np.ndarray
    xi_per_output: np.ndarray | None = None
    xi_total: float = -np.inf
    reject_reason: str = ""
    lam: float = np.nan
    draw_index: int = -1

    @property
    def accepted(self) -> bool:
        return self.xi_per_output is not None and bool(np.min(self.xi_per_output) >= 0)


def xi_scores(traces: np.ndarray, residual: np.ndarray, r: float, mu: float) -> np.ndarray:
    """Acceptance margins for a batch of candidate traces.

    Args:
        traces: ``(C, n)`` candidate outputs over the scored samples.
        residual: ``(L, n)`` current training residual.

    Returns:
        ``(C, L)`` array of ``<e_q, g>^2 / <g, g> - (1 - mu - r) <e_q, e_q>``;
        rows with a zero trace are ``-inf``.
    """
    traces = np.atleast_2d(traces)
    residual = np.atleast_2d(residual)
    g_sq = np.einsum("ij,ij->i", traces, traces)
    proj = traces @ residual.T
    e_sq = np.einsum("ij,ij->i", residual, residual)
    with np.errstate(divide="ignore", invalid="ignore"):
        captured = proj**2 / g_sq[:, None]
    xi = captured - (1.0 - mu - r) * e_sq[None, :]
    xi[g_sq <= 0] = -np.inf
    return xi


def score_candidate(candidate: CandidateNode, residual: np.ndarray, r: float, mu: float, washout: int = 0) -> CandidateNode:
    """Attach per-output and total scores to ``candidate``.

    ``candidate.node_trace`` may cover the washout; only columns from
    ``washout`` on are scored, matching ``residual``.
    """
    g = np.asarray(candidate.node_trace, dtype=float)[washout:]
    residual = np.atleast_2d(residual)
    if g.size != residual.shape[1]:
        raise ShapeError(f"trace has {g.size} scored samples, residual has {residual.shape[1]}")
    if not np.any(g):
        candidate.xi_per_output = np.full(residual.shape[0], -np.inf)
        candidate.xi_total = -np.inf
        candidate.reject_reason = "zero-norm trace"
        return candidate
    xi = xi_scores(g[None, :], residual, r, mu)[0]
    candidate.xi_per_output = xi
    candidate.xi_total = float(xi.sum())
    candidate.reject_reason = "" if np.min(xi) >= 0 else "inequality violated"
    return candidate


def early_stop_check(history: Sequence[float], n_step: int) -> int:
    """Number of nodes to roll back: ``n_step`` if the last ``n_step + 1``
    validation errors never decrease, else 0."""
    if len(history) <= n_step:
        return 0
    tail = np.asarray(history[-(n_step + 1):], dtype=float)
    return n_step if bool(np.all(np.diff(tail) >= 0)) else 0


# --------------------------------------------------------------------- model


@dataclass(frozen=True)
class DeepModel:
    """Stacked reservoirs with one readout over all of their nodes."""

    layers: tuple
    readout: ReadoutWeights
    concat_input: bool = False

    @property
    def layer_sizes(self) -> tuple:
        return tuple(layer.size for layer in self.layers)

    @property
    def total_nodes(self) -> int:
        return sum(self.layer_sizes)

    def layer_states(self, inputs: np.ndarray) -> list[np.ndarray]:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        out = []
        drive = inputs
        for layer in self.layers:
            states = rollout_layer(layer, drive).states
            out.append(states)
            drive = np.vstack([states, inputs]) if self.concat_input else states
        return out

    def features(self, inputs: np.ndarray) -> np.ndarray:
        states = self.layer_states(inputs)
        if not states:
            return np.zeros((0, np.atleast_2d(inputs).shape[1]))
        return np.vstack(states)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return self.readout.apply(self.features(inputs))


# ------------------------------------------------------------------- builder


class _Layer:
    """Append-only weights and cached states of one layer under construction."""

    def __init__(self, input_dim: int, train_inputs: np.ndarray, val_inputs: np.ndarray | None):
        self.w_in = np.zeros((0, input_dim))
        self.w_r = np.zeros((0, 0))
        self.bias = np.zeros(0)
        self.train_inputs = train_inputs
        self.val_inputs = val_inputs
        self.train_states = np.zeros((0, train_inputs.shape[1]))
        self.val_states = None if val_inputs is None else np.zeros((0, val_inputs.shape[1]))

    @property
    def size(self) -> int:
        return self.bias.size

    def append(self, w_in_row, w_r_row, bias, train_trace, val_trace):
        n = self.size
        w_r = np.zeros((n + 1, n + 1))
        w_r[:n, :n] = self.w_r
        w_r[n, :] = w_r_row
        self.w_r = w_r
        self.w_in = np.vstack([self.w_in, w_in_row])
        self.bias = np.append(self.bias, bias)
        self.train_states = np.vstack([self.train_states, train_trace])
        if self.val_states is not None:
            self.val_states = np.vstack([self.val_states, val_trace])

    def truncate(self, n: int):
        self.w_in = self.w_in[:n]
        self.w_r = self.w_r[:n, :n]
        self.bias = self.bias[:n]
        self.train_states = self.train_states[:n]
        if self.val_states is not None:
            self.val_states = self.val_states[:n]

    def params(self, activation: Activation) -> LayerParams:
        return LayerParams(self.w_in.copy(), self.w_r.copy(), self.bias.copy(), activation, triangular=True)


@dataclass
class ConstructionState:
    """Mutable bookkeeping for one construction run."""

    cfg: RscConfig
    train: TimeSeriesDataset
    validation: TimeSeriesDataset | None
    layers: list = field(default_factory=list)
    readout: ReadoutWeights | None = None
    residual: np.ndarray | None = None
    val_history: list = field(default_factory=list)
    val_nrmse_history: list = field(default_factory=list)
    residual_history: list = field(default_factory=list)
    _solver: IncrementalLeastSquares | None = field(default=None, repr=False)

    @property
    def current_layer(self) -> int:
        return len(self.layers)

    @property
    def nodes_in_layer(self) -> int:
        return self.layers[-1].size if self.layers else 0

    @property
    def total_nodes(self) -> int:
        return sum(layer.size for layer in self.layers)

    @property
    def n_sum(self) -> int:
        if not self.layers:
            return 0
        return n_sum_of(self.current_layer, self.nodes_in_layer, self.cfg.max_nodes)

    @property
    def scored_targets(self) -> np.ndarray:
        return self.train.targets[:, self.train.washout:]

    def train_features(self) -> np.ndarray:
        w = self.train.washout
        if not self.layers:
            return np.zeros((0, self.train.n_samples - w))
        return np.vstack([layer.train_states[:, w:] for layer in self.layers])

    def val_features(self) -> np.ndarray:
        w = self.validation.washout
        return np.vstack([layer.val_states[:, w:] for layer in self.layers])

    def layout(self) -> tuple:
        return tuple((f"layer{i + 1}", layer.size) for i, layer in enumerate(self.layers))

    def new_layer(self) -> _Layer:
        """Open the next layer, wiring its inputs to the previous layer's states."""
        if not self.layers:
            tr_in = self.train.inputs
            va_in = None if self.validation is None else self.validation.inputs
        else:
            prev = self.layers[-1]
            tr_in, va_in = prev.train_states, prev.val_states
            if self.cfg.concat_input:
                tr_in = np.vstack([tr_in, self.train.inputs])
                if va_in is not None:
                    va_in = np.vstack([va_in, self.validation.inputs])
        layer = _Layer(tr_in.shape[0], tr_in, va_in)
        self.layers.append(layer)
        return layer

    def _sync_solver(self) -> IncrementalLeastSquares:
        if self._solver is None:
            self._solver = IncrementalLeastSquares(self.scored_targets)
        solver = self._solver
        if solver.n_columns > self.total_nodes:
            solver.truncate(self.total_nodes)
        if solver.n_columns < self.total_nodes:
            w = self.train.washout
            rows = [row for layer in self.layers for row in layer.train_states]
            for row in rows[solver.n_columns:]:
                solver.add_column(row[w:])
        return solver

    def refit(self) -> None:
        """Global least squares over every cached node, then refresh errors."""
        t = self.scored_targets
        if self.total_nodes == 0:
            self.readout = ReadoutWeights.zeros(t.shape[0], 0)
            self.residual = t.copy()
        else:
            solver = self._sync_solver()
            self.readout = ReadoutWeights(solver.weights(), self.layout())
            self.residual = solver.residual.copy()
        self.residual_history.append(float(np.linalg.norm(self.residual)))
        if self.validation is not None:
            vt = self.validation.targets[:, self.validation.washout:]
            pred = self.readout.w_out @ self.val_features() if self.layers else np.zeros_like(vt)
            err = float(np.linalg.norm(vt - pred))
            self.val_history.append(err)
            var = float(np.mean(vt.var(axis=1)))
            self.val_nrmse_history.append(err / np.sqrt(vt.size * var) if var > 0 else np.inf)

    def model(self) -> DeepModel:
        layers = tuple(layer.params(self.cfg.activation) for layer in self.layers if layer.size)
        return DeepModel(layers, self.readout, self.cfg.concat_input)

    def rollback(self, n_nodes: int) -> None:
        """Remove the newest ``n_nodes`` nodes (dropping emptied layers) and refit."""
        remaining = n_nodes
        while remaining and self.layers:
            layer = self.layers[-1]
            cut = min(remaining, layer.size)
            layer.truncate(layer.size - cut)
            remaining -= cut
            if layer.size == 0:
                self.layers.pop()
        del self.val_history[-n_nodes:]
        del self.val_nrmse_history[-n_nodes:]
        del self.residual_history[-n_nodes:]
        # refit appends fresh entries for the restored model
        self.val_history.pop()
        self.val_nrmse_history.pop()
        self.residual_history.pop()
        self.refit()


def seed_layer(state: ConstructionState, rng: np.random.Generator) -> None:
    """Open layer 1 with the initial sparse reservoir and fit it.

    The seed nodes are not screened. ``w_r`` is drawn sparse and then
    restricted to its lower triangle.
    """
    cfg = state.cfg
    layer = state.new_layer()
    n = cfg.initial_reservoir_size
    if n:
        lam = cfg.lambdas[0]
        k = layer.w_in.shape[1]
        w_in = rng.uniform(-lam, lam, size=(n, k))
        bias = rng.uniform(-lam, lam, size=n)
        w_r = np.tril(sparse_uniform_matrix(n, n, cfg.density, lam, rng)) if n * n * cfg.density >= 1 else np.zeros((n, n))
        if cfg.spectral_target is not None:
            try:
                w_r = spectral_rescale(w_r, cfg.spectral_target)
            except NilpotentMatrixError:
                logger.debug("seed reservoir is nilpotent; skipping spectral rescale")
        params = LayerParams(w_in, w_r, bias, cfg.activation, triangular=True)
        tr = rollout_layer(params, layer.train_inputs).states
        va = None if layer.val_inputs is None else rollout_layer(params, layer.val_inputs).states
        layer.w_in, layer.w_r, layer.bias = w_in, w_r, bias
        layer.train_states = tr
        if va is not None:
            layer.val_states = va
    state.refit()


def _draw_batch(rng, lam, n_cand, input_dim, n_nodes, recurrent_density=1.0):
    draw = rng.uniform(-lam, lam, size=(n_cand, input_dim + n_nodes + 2))
    w_in, w_r, b = draw[:, :input_dim], draw[:, input_dim : input_dim + n_nodes + 1], draw[:, -1]
    if recurrent_density < 1 and n_nodes:
        # links to earlier nodes are kept with this probability; the self-link always is
        w_r[:, :n_nodes] *= rng.random((n_cand, n_nodes)) < recurrent_density
    return w_in, w_r, b


def sample_candidate(state: ConstructionState, lam: float, rng: np.random.Generator) -> CandidateNode:
    """Draw one dense candidate for the current layer and roll it out on the training inputs."""
    layer = state.layers[-1]
    w_in, w_r, b = _draw_batch(rng, lam, 1, layer.w_in.shape[1], layer.size, state.cfg.recurrent_density)
    trace = rollout_candidates(layer.train_states, layer.train_inputs, w_in, w_r, b, state.cfg.activation)[0]
    return CandidateNode(w_in[0], w_r[0], float(b[0]), trace, lam=lam, draw_index=0)


@dataclass
class NodeSearch:
    """Outcome of one call to :func:`configure_node`."""

    candidate: CandidateNode | None
    r: float
    mu: float
    lam: float
    evaluated: int
    relaxations: int


def configure_node(state: ConstructionState, rng: np.random.Generator) -> NodeSearch:
    """Search for the best admissible new node of the current layer.

    Weight scales are tried in ascending order; each scale gets a pool of
    ``g_max`` random candidates. With ``search_order="scale"`` (default) every
    pool is screened against the contraction levels of ``r_sequence`` in turn
    before moving to a larger scale; with ``search_order="contraction"`` the
    whole scale sweep runs at one level before r is relaxed. The first
    admissible pool wins and its highest-scoring candidate is returned (lowest
    draw index on ties). When the sequence is exhausted, r grows by a random
    ``tau ~ U(0, 1 - r)`` and the cached pools are rescored, up to
    ``max_relaxations`` times.

    Returns:
        A :class:`NodeSearch` whose ``candidate`` is None if every relaxation
        failed.
    """
    cfg = state.cfg
    layer = state.layers[-1]
    w = state.train.washout
    e = state.residual
    n_sum = state.n_sum
    pools: dict[int, tuple] = {}
    evaluated = 0

    def pool(i):
        nonlocal evaluated
        if i not in pools:
            w_in, w_r, b = _draw_batch(
                rng, cfg.lambdas[i], cfg.g_max, layer.w_in.shape[1], layer.size, cfg.recurrent_density
            )
            traces = rollout_candidates(layer.train_states, layer.train_inputs, w_in, w_r, b, cfg.activation)
            pools[i] = (w_in, w_r, b, traces, traces[:, w:] @ e.T, np.einsum("ij,ij->i", traces[:, w:], traces[:, w:]))
            evaluated += cfg.g_max
        return pools[i]

    e_sq = np.einsum("ij,ij->i", e, e)

    def best_in(i, r):
        w_in, w_r, b, traces, proj, g_sq = pool(i)
        mu = mu_value(n_sum, r)
        with np.errstate(divide="ignore", invalid="ignore"):
            xi = proj**2 / g_sq[:, None] - (1.0 - mu - r) * e_sq[None, :]
        xi[g_sq <= 0] = -np.inf
        admissible = np.min(xi, axis=1) >= 0
        if not admissible.any():
            return None
        totals = np.where(admissible, xi.sum(axis=1), -np.inf)
        k = int(np.argmax(totals))
        return CandidateNode(
            w_in[k].copy(), w_r[k].copy(), float(b[k]), traces[k].copy(),
            xi[k].copy(), float(totals[k]), "", cfg.lambdas[i], k,
        ), mu

    def found(hit, r, relaxations):
        cand, mu = hit
        return NodeSearch(cand, r, mu, cand.lam, evaluated, relaxations)

    levels = list(cfg.r_sequence)
    if cfg.search_order == "scale":
        for i in range(len(cfg.lambdas)):
            for r in levels:
                hit = best_in(i, r)
                if hit:
                    return found(hit, r, 0)
    else:
        for r in levels:
            for i in range(len(cfg.lambdas)):
                hit = best_in(i, r)
                if hit:
                    return found(hit, r, 0)
    r = levels[-1]
    for relaxations in range(1, cfg.max_relaxations + 1):
        r = r + rng.uniform(0.0, 1.0 - r)
        for i in range(len(cfg.lambdas)):
            hit = best_in(i, r)
            if hit:
                return found(hit, r, relaxations)
    return NodeSearch(None, r, mu_value(n_sum, r), np.nan, evaluated, cfg.max_relaxations)


@dataclass
class Certificate:
    """Residual checks for one accepted node."""

    constructive_ok: bool
    monotone_ok: bool
    refit_ok: bool
    old_sq: float
    constructive_sq: float
    new_sq: float
    bound_sq: float

    @property
    def ok(self) -> bool:
        return self.constructive_ok and self.monotone_ok and self.refit_ok


def add_node_and_refit(state: ConstructionState, chosen: CandidateNode, r: float, mu: float) -> Certificate:
    """Append ``chosen`` to the current layer, refit globally and verify the decrease.

    Before the refit, the node's single-node constructive weight
    ``<e_q, g> / <g, g>`` must shrink each output's squared residual to at most
    ``(r + mu)`` times its previous value. The refit residual must then be no
    larger than both the constructive one and the previous residual.
    """
    layer = state.layers[-1]
    w = state.train.washout
    e_old = state.residual
    g = chosen.node_trace[w:]
    beta = (e_old @ g) / (g @ g)
    e_con = e_old - np.outer(beta, g)
    old_q = np.einsum("ij,ij->i", e_old, e_old)
    con_q = np.einsum("ij,ij->i", e_con, e_con)
    bound_q = (r + mu) * old_q
    scale = max(float(old_q.sum()), np.finfo(float).tiny)
    constructive_ok = bool(np.all(con_q <= bound_q + CERT_RTOL * scale))

    val_trace = None
    if layer.val_inputs is not None:
        val_trace = rollout_candidates(
            layer.val_states, layer.val_inputs, chosen.w_in_row[None, :], chosen.w_r_row[None, :],
            [chosen.bias], state.cfg.activation,
        )[0]
    layer.append(chosen.w_in_row, chosen.w_r_row, chosen.bias, chosen.node_trace, val_trace)
    state.refit()
    new_sq = float(np.sum(state.residual**2))
    return Certificate(
        constructive_ok,
        monotone_ok=new_sq <= float(old_q.sum()) + CERT_RTOL * scale,
        refit_ok=new_sq <= float(con_q.sum()) + CERT_RTOL * scale,
        old_sq=float(old_q.sum()),
        constructive_sq=float(con_q.sum()),
        new_sq=new_sq,
        bound_sq=float(bound_q.sum()),
    )


@dataclass
class ConstructionResult:
    model: DeepModel
    log: list
    stop_reason: str
    residual_history: list
    val_nrmse_history: list

    @property
    def certificate_violations(self) -> int:
        return sum(1 for rec in self.log if rec.get("accepted") and not rec.get("certificate_ok", True))

    @property
    def monotone_violations(self) -> int:
        return sum(1 for rec in self.log if rec.get("accepted") and not rec.get("monotone_ok", True))

    def write_log(self, path) -> None:
        with open(path, "w") as fh:
            for rec in self.log:
                fh.write(json.dumps(rec, sort_keys=True) + "\n")


def construct_deep_rscn(
    cfg: RscConfig,
    train: TimeSeriesDataset,
    validation: TimeSeriesDataset | None = None,
    rng: np.random.Generator | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> ConstructionResult:
    """Build a DeepRSCN (an RSCN when ``cfg`` has one layer).

    Construction stops when the training residual norm drops to
    ``cfg.tolerance``, when the validation error fails to decrease over
    ``cfg.n_step`` consecutive additions (the last ``n_step`` nodes are then
    removed), or when every layer is full.

    Raises:
        ConfigurationError: if a node search fails; the partial log is attached.
    """
    if validation is not None and (validation.input_dim != train.input_dim or validation.output_dim != train.output_dim):
        raise ShapeError("train and validation sets disagree on dimensions")
    rng = np.random.default_rng(cfg.seed) if rng is None else rng
    state = ConstructionState(cfg, train, validation)
    seed_layer(state, rng)
    log: list[dict] = []
    use_es = cfg.early_stopping and validation is not None
    stop_reason = "all layers full"

    while True:
        if state.residual_history[-1] <= cfg.tolerance:
            stop_reason = "tolerance reached"
            break
        if state.nodes_in_layer >= cfg.max_nodes[state.current_layer - 1]:
            if state.current_layer >= cfg.layer_count:
                stop_reason = "all layers full"
                break
            state.new_layer()
            log.append({"event": "new layer", "layer": state.current_layer})

        t0 = clock()
        search = configure_node(state, rng)
        record = {
            "layer": state.current_layer,
            "node": state.nodes_in_layer + 1,
            "n_sum": state.n_sum + 1,
            "lambda": search.lam,
            "r": search.r,
            "mu": search.mu,
            "relaxations": search.relaxations,
            "candidates": search.evaluated,
            "accepted": search.candidate is not None,
        }
        if search.candidate is None:
            record["wall_time"] = clock() - t0
            log.append(record)
            raise ConfigurationError(
                f"configuration failed at layer {state.current_layer}, node {state.nodes_in_layer + 1}: "
                f"no admissible candidate after {search.relaxations} relaxations of r",
                log,
            )
        cert = add_node_and_refit(state, search.candidate, search.r, search.mu)
        record.update(
            xi_total=search.candidate.xi_total,
            residual_norm=state.residual_history[-1],
            val_nrmse=state.val_nrmse_history[-1] if state.val_nrmse_history else None,
            certificate_ok=cert.constructive_ok and cert.refit_ok,
            monotone_ok=cert.monotone_ok,
            bound_sq=cert.bound_sq,
            constructive_sq=cert.constructive_sq,
            new_sq=cert.new_sq,
            wall_time=clock() - t0,
        )
        log.append(record)

        if use_es and state.total_nodes > cfg.n_step:
            back = early_stop_check(state.val_history, cfg.n_step)
            if back:
                state.rollback(back)
                log.append({"event": "early stop", "removed": back, "total_nodes": state.total_nodes})
                stop_reason = "early stopping"
                break

    return ConstructionResult(state.model(), log, stop_reason, list(state.residual_history), list(state.val_nrmse_history))
