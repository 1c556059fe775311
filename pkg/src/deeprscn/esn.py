"""Echo state network baselines: a single reservoir and the layer-wise DeepESN."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

from .datasets import TimeSeriesDataset
from .readout import ReadoutWeights, solve_least_squares
from .reservoir import (
    Activation,
    LayerParams,
    NilpotentMatrixError,
    ShapeError,
    rollout_layer,
    sparse_uniform_matrix,
    spectral_rescale,
)

MAX_RESAMPLES = 20


@dataclass(frozen=True)
class EsnConfig:
    reservoir_size: int
    input_dim: int
    output_dim: int = 1
    weight_scale: float = 1.0
    density: float = 0.02
    spectral_target: float = 0.9
    activation: Activation = Activation.TANH

    def __post_init__(self):
        if self.reservoir_size < 1:
            raise ValueError("reservoir_size must be at least 1")
        if not 0 < self.density <= 1:
            raise ValueError("density must lie in (0, 1]")
        if self.spectral_target <= 0:
            raise ValueError("spectral_target must be positive")
        if self.weight_scale <= 0:
            raise ValueError("weight_scale must be positive")


@dataclass(frozen=True)
class EsnModel:
    layer: LayerParams
    readout: ReadoutWeights

    @property
    def w_out(self) -> np.ndarray:
        return self.readout.w_out

    def features(self, inputs: np.ndarray) -> np.ndarray:
        """Stack of reservoir states and raw inputs, shape ``(N + K, n)``."""
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        states = rollout_layer(self.layer, inputs).states
        return np.vstack([states, inputs])


def build_esn(config: EsnConfig, rng: np.random.Generator) -> EsnModel:
    """Sample a reservoir with U[-lambda, lambda] weights and a rescaled sparse ``w_r``.

    Nilpotent draws of the sparse matrix are resampled up to ``MAX_RESAMPLES``
    times.
    """
    n, k, lam = config.reservoir_size, config.input_dim, config.weight_scale
    w_in = rng.uniform(-lam, lam, size=(n, k))
    bias = rng.uniform(-lam, lam, size=n)
    for _ in range(MAX_RESAMPLES):
        try:
            w_r = spectral_rescale(sparse_uniform_matrix(n, n, config.density, lam, rng), config.spectral_target)
            break
        except NilpotentMatrixError:
            continue
    else:
        raise NilpotentMatrixError(
            f"could not draw a non-nilpotent {n}x{n} reservoir at density {config.density} "
            f"in {MAX_RESAMPLES} attempts; increase the density"
        )
    layer = LayerParams(w_in, w_r, bias, config.activation, triangular=False)
    readout = ReadoutWeights.zeros(config.output_dim, n + k, (("reservoir", n), ("input", k)))
    return EsnModel(layer, readout)


def _fit_readout(features: np.ndarray, targets: np.ndarray, layout) -> ReadoutWeights:
    if features.shape[1] < features.shape[0]:
        warnings.warn(
            f"{features.shape[1]} fitted samples for {features.shape[0]} readout columns; "
            "using the minimum-norm solution",
            RuntimeWarning,
            stacklevel=3,
        )
    return solve_least_squares(features, targets, layout)


def train_esn(model: EsnModel, dataset: TimeSeriesDataset, washout: int | None = None) -> EsnModel:
    """Fit the readout over the post-washout columns of ``dataset``."""
    washout = dataset.washout if washout is None else washout
    if dataset.input_dim != model.layer.input_dim:
        raise ShapeError(f"model expects {model.layer.input_dim} inputs, dataset has {dataset.input_dim}")
    if dataset.output_dim != model.readout.n_outputs:
        raise ShapeError(f"model has {model.readout.n_outputs} outputs, dataset has {dataset.output_dim}")
    x = model.features(dataset.inputs)[:, washout:]
    readout = _fit_readout(x, dataset.targets[:, washout:], model.readout.feature_layout)
    return replace(model, readout=readout)


def predict_esn(model: EsnModel, inputs: np.ndarray) -> np.ndarray:
    """Outputs for every column of ``inputs`` from a fresh zero state.

    Washout columns are included; callers drop them before scoring.
    """
    inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
    if inputs.shape[0] != model.layer.input_dim:
        raise ShapeError(f"model expects {model.layer.input_dim} inputs, got {inputs.shape[0]}")
    return model.readout.apply(model.features(inputs))


@dataclass(frozen=True)
class DeepEsnModel:
    """Stack of ESNs where layer i+1 is driven by ``[y_i(n); u(n)]``.

    Every layer keeps its own readout because its output feeds the next layer
    at prediction time too. The last readout gives the model output.
    """

    layers: tuple = field(default=())

    @property
    def layer_sizes(self) -> tuple:
        return tuple(m.layer.size for m in self.layers)

    def layer_outputs(self, inputs: np.ndarray) -> list[np.ndarray]:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        outputs = []
        drive = inputs
        for m in self.layers:
            states = rollout_layer(m.layer, drive).states
            y = m.readout.apply(np.vstack([states, inputs]))
            outputs.append(y)
            drive = np.vstack([y, inputs])
        return outputs

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return self.layer_outputs(inputs)[-1]


def build_and_train_deep_esn(
    configs: Sequence[EsnConfig],
    dataset: TimeSeriesDataset,
    rng: np.random.Generator,
    washout: int | None = None,
) -> DeepEsnModel:
    """Build and fit each layer in order on the training set.

    Layer 1 reads ``u(n)``; layer i >= 2 reads the previous layer's fitted
    output stacked on ``u(n)``. Each readout sees the layer state plus ``u(n)``.
    """
    if not configs:
        raise ValueError("need at least one layer config")
    washout = dataset.washout if washout is None else washout
    k, l = dataset.input_dim, dataset.output_dim
    trained = []
    drive = dataset.inputs
    for i, cfg in enumerate(configs):
        expected = k if i == 0 else l + k
        if cfg.input_dim != expected:
            cfg = replace(cfg, input_dim=expected)
        if cfg.output_dim != l:
            cfg = replace(cfg, output_dim=l)
        model = build_esn(cfg, rng)
        states = rollout_layer(model.layer, drive).states
        x = np.vstack([states, dataset.inputs])
        layout = (("reservoir", model.layer.size), ("input", k))
        readout = _fit_readout(x[:, washout:], dataset.targets[:, washout:], layout)
        model = replace(model, readout=readout)
        trained.append(model)
        drive = np.vstack([readout.apply(x), dataset.inputs])
    return DeepEsnModel(tuple(trained))


def deep_esn_configs(sizes: Sequence[int], input_dim: int, output_dim: int = 1, **kwargs) -> list[EsnConfig]:
    """Per-layer configs for a DeepESN with the given reservoir sizes."""
    return [
        EsnConfig(n, input_dim if i == 0 else output_dim + input_dim, output_dim, **kwargs)
        for i, n in enumerate(sizes)
    ]
