import warnings

import numpy as np
import pytest

from deeprscn.datasets import TimeSeriesDataset, build_mg_task, generate_mackey_glass
from deeprscn.esn import (
    EsnConfig,
    build_and_train_deep_esn,
    build_esn,
    deep_esn_configs,
    predict_esn,
    train_esn,
)
from deeprscn.reservoir import ShapeError, spectral_radius


def test_build_esn_shapes_and_scaling(rng):
    m = build_esn(EsnConfig(50, 3, weight_scale=0.5, density=0.05, spectral_target=0.8), rng)
    assert m.layer.w_in.shape == (50, 3) and m.w_out.shape == (1, 53)
    assert np.all(np.abs(m.layer.w_in) <= 0.5)
    assert spectral_radius(m.layer.w_r) == pytest.approx(0.8, rel=1e-9)
    assert np.count_nonzero(m.layer.w_r) <= int(np.ceil(0.05 * 2500))
    assert not m.layer.triangular


def test_config_validation():
    with pytest.raises(ValueError):
        EsnConfig(0, 1)
    with pytest.raises(ValueError):
        EsnConfig(5, 1, density=1.5)


def test_readout_recovers_linear_input_map(rng):
    u = rng.uniform(-1, 1, (2, 300))
    ds = TimeSeriesDataset(u, 2 * u[:1] - 0.5 * u[1:], 10)
    m = train_esn(build_esn(EsnConfig(20, 2), rng), ds)
    pred = predict_esn(m, u)[:, 10:]
    np.testing.assert_allclose(pred, ds.scored_targets, atol=1e-8)


def test_esn_on_mg_beats_the_mean():
    tr, va, te = build_mg_task(generate_mackey_glass(), "MG")
    m = train_esn(build_esn(EsnConfig(50, 4), np.random.default_rng(0)), tr)
    err = predict_esn(m, te.inputs)[:, 20:] - te.scored_targets
    assert np.sqrt(np.mean(err**2) / te.scored_targets.var()) < 0.2


def test_underdetermined_fit_warns(rng):
    ds = TimeSeriesDataset(rng.uniform(-1, 1, (1, 30)), rng.standard_normal((1, 30)), 0)
    with pytest.warns(RuntimeWarning, match="minimum-norm"):
        train_esn(build_esn(EsnConfig(40, 1, density=0.1), rng), ds)


def test_dimension_checks(rng):
    m = build_esn(EsnConfig(10, 2), rng)
    with pytest.raises(ShapeError):
        predict_esn(m, np.zeros((3, 5)))
    with pytest.raises(ShapeError):
        train_esn(m, TimeSeriesDataset(np.zeros((1, 5)), np.zeros((1, 5))))


def test_deep_esn_layer_wiring(rng):
    tr, _, _ = build_mg_task(generate_mackey_glass(), "MG")
    cfgs = deep_esn_configs((30, 10, 8), 4)
    assert [c.input_dim for c in cfgs] == [4, 5, 5]
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        model = build_and_train_deep_esn(cfgs, tr, rng)
    assert model.layer_sizes == (30, 10, 8)
    outs = model.layer_outputs(tr.inputs)
    assert len(outs) == 3 and all(o.shape == (1, 500) for o in outs)
    np.testing.assert_array_equal(model.predict(tr.inputs), outs[-1])
    # each readout sees its own states plus the raw input
    assert [m.readout.n_features for m in model.layers] == [34, 14, 12]


def test_deep_esn_needs_layers(rng):
    ds = TimeSeriesDataset(np.zeros((1, 5)), np.zeros((1, 5)))
    with pytest.raises(ValueError):
        build_and_train_deep_esn([], ds, rng)
