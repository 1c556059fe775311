import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import brentq

from deeprscn.datasets import (
    MG_LAGS,
    CsvFormatError,
    CsvSchema,
    MgConfig,
    SysIdConfig,
    TimeSeriesDataset,
    add_gaussian_noise,
    build_mg_task,
    generate_mackey_glass,
    generate_sysid,
    load_csv,
    read_csv_columns,
    simulate_plant,
    sysid_test_input,
    write_csv,
)

# ------------------------------------------------------------------ Mackey-Glass


def decay_error(h, points=120):
    cfg = MgConfig(alpha_mg=0.0, constant_history=1.0, integration_step=h, total_points=points)
    y = generate_mackey_glass(cfg)
    n = np.arange(17, points)
    return y[17:] - np.exp(-0.1 * (n - 17))


def test_pure_decay_matches_closed_form():
    err = decay_error(0.1)
    # midpoint rule on y' = -0.1 y: local error (h|v|)^3 / 6 per step, relative
    steps = np.arange(err.size) * 10
    bound = steps * (0.1 * 0.1) ** 3 / 6 * 1.01 + 1e-15
    assert np.all(np.abs(err) <= bound)


def test_step_halving_is_second_order():
    e1 = np.max(np.abs(decay_error(0.1)))
    e2 = np.max(np.abs(decay_error(0.05)))
    assert 3.5 < e1 / e2 < 4.5


def test_constant_history_at_fixed_point_stays_put():
    v, a, p = -0.1, 0.2, 10.0
    c = brentq(lambda y: a * y / (1 + y**p) + v * y, 0.5, 1.5)
    y = generate_mackey_glass(MgConfig(upsilon=v, alpha_mg=a, exponent=p, constant_history=c, total_points=300))
    np.testing.assert_allclose(y, c, rtol=0, atol=1e-12)


@pytest.mark.parametrize("sampling", ["grid", "unit"])
def test_default_series_is_bounded_and_varied(sampling):
    y = generate_mackey_glass(MgConfig(history_sampling=sampling))
    assert y.shape == (1177,)
    assert np.all(np.isfinite(y)) and y.min() > 0 and y.max() < 2
    tail = y[300:]
    assert tail.std() > 0.1
    # no short period on the attractor
    assert not any(np.allclose(tail[lag:], tail[:-lag], atol=1e-3) for lag in range(1, 200))


def test_unit_history_is_piecewise_linear():
    y = generate_mackey_glass(MgConfig(history_sampling="unit", seed=3))
    rng = np.random.default_rng(3)
    np.testing.assert_array_equal(y[:18], rng.uniform(0.1, 1.3, 18))


def test_generator_is_seeded():
    a = generate_mackey_glass(MgConfig(seed=5))
    np.testing.assert_array_equal(a, generate_mackey_glass(MgConfig(seed=5)))
    assert not np.array_equal(a, generate_mackey_glass(MgConfig(seed=6)))


@pytest.mark.parametrize("kw", [{"integration_step": 0.3}, {"tau_delay": -1.0}, {"total_points": 10}, {"history_sampling": "x"}])
def test_generator_rejects_bad_config(kw):
    with pytest.raises(ValueError):
        generate_mackey_glass(MgConfig(**kw))


@pytest.mark.parametrize("variant,k", [("MG", 4), ("MG1", 3), ("MG2", 2)])
def test_mg_task_dimensions_and_splits(variant, k):
    series = generate_mackey_glass()
    tr, va, te = build_mg_task(series, variant)
    assert tr.input_dim == va.input_dim == te.input_dim == k
    assert (tr.n_samples, va.n_samples) == (500, 300)
    assert te.n_samples == 1177 - 18 - 6 - 800
    assert tr.washout == va.washout == te.washout == 20


def test_mg_samples_index_the_same_series():
    series = np.arange(1177, dtype=float)
    splits = build_mg_task(series, "MG")
    lags = MG_LAGS["MG"]
    for offset, ds in zip((0, 500, 800), splits):
        for j in (0, 7, ds.n_samples - 1):
            n = 18 + offset + j
            np.testing.assert_array_equal(ds.inputs[:, j], [n - lag for lag in lags])
            assert ds.targets[0, j] == n + 6
    # the three splits cover disjoint target ranges
    ends = [(ds.targets.min(), ds.targets.max()) for ds in splits]
    assert ends[0][1] < ends[1][0] and ends[1][1] < ends[2][0]


def test_mg_task_rejects_short_series_and_bad_variant():
    with pytest.raises(ValueError, match="too short"):
        build_mg_task(np.ones(500))
    with pytest.raises(ValueError, match="variant"):
        build_mg_task(np.ones(1177), "MG3")


# ------------------------------------------------------------------ plant


def scripted_plant(u, steps):
    # 1-based transcription of the recursion
    y = {1: 0.0, 2: 0.0, 3: 0.0, 4: 0.1}
    uu = {i + 1: v for i, v in enumerate(u)}
    for n in range(4, steps + 4):
        y[n + 1] = 0.72 * y[n] + 0.025 * y[n - 1] * uu[n - 1] + 0.01 * uu[n - 2] ** 2 + 0.2 * uu[n - 3]
    return y


def test_plant_matches_scripted_recursion(rng):
    u = rng.uniform(-1, 1, 30)
    y = simulate_plant(u)
    ref = scripted_plant(u, 20)
    for n in range(1, 25):
        assert y[n - 1] == pytest.approx(ref[n], abs=1e-15)


def test_sysid_initial_outputs_and_shapes():
    tr, va, te = generate_sysid()
    for ds, n in zip((tr, va, te), (2000, 1000, 1000)):
        np.testing.assert_array_equal(ds.inputs[0, :4], [0, 0, 0, 0.1])
        assert ds.n_samples == n and ds.washout == 100
        # target is the next output
        np.testing.assert_array_equal(ds.targets[0, :-1], ds.inputs[0, 1:])


def test_sysid_test_schedule():
    _, _, te = generate_sysid()
    u = te.inputs[1]
    assert u[300 - 1] == 1.0
    assert u[600 - 1] == -1.0
    assert u[10 - 1] == pytest.approx(np.sin(np.pi * 10 / 25))
    n = 800
    assert sysid_test_input(np.array([n]))[0] == pytest.approx(
        0.6 * np.cos(np.pi * n / 10) + 0.1 * np.cos(np.pi * n / 32) + 0.3 * np.sin(np.pi * n / 25)
    )


def test_sysid_training_inputs_uniform_and_seeded():
    a = generate_sysid(SysIdConfig(seed=1))
    b = generate_sysid(SysIdConfig(seed=1))
    np.testing.assert_array_equal(a.train.inputs, b.train.inputs)
    u = a.train.inputs[1]
    assert u.min() >= -1 and u.max() <= 1 and abs(u.mean()) < 0.1
    assert not np.array_equal(a.train.inputs[1, :1000], a.validation.inputs[1])


# ------------------------------------------------------------------ CSV


def test_identity_schema_round_trips(tmp_path, rng):
    data = {"a": rng.standard_normal(50), "b": rng.standard_normal(50), "y": rng.standard_normal(50)}
    p = tmp_path / "d.csv"
    write_csv(p, data)
    (ds,) = load_csv(p, CsvSchema(["a", "b"], ["y"]), [-1])
    np.testing.assert_array_equal(ds.inputs, np.stack([data["a"], data["b"]]))
    np.testing.assert_array_equal(ds.targets[0], data["y"])


def test_lag_one_shifts_by_one_row(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, {"u": np.arange(10.0), "y": np.arange(10.0) * 10})
    (ds,) = load_csv(p, CsvSchema(["u", ("y", 1)], ["y"]), [-1])
    assert ds.n_samples == 9
    np.testing.assert_array_equal(ds.inputs[0], np.arange(1.0, 10.0))
    np.testing.assert_array_equal(ds.inputs[1], np.arange(0.0, 9.0) * 10)
    np.testing.assert_array_equal(ds.targets[0], np.arange(1.0, 10.0) * 10)


def test_industrial_style_split_shapes(tmp_path, rng):
    cols = {f"u{i}": rng.standard_normal(2394) for i in range(1, 6)}
    cols["y"] = rng.standard_normal(2394)
    p = tmp_path / "plant.csv"
    write_csv(p, cols)
    tr, te = load_csv(p, CsvSchema([f"u{i}" for i in range(1, 6)], ["y"]), [1500, 894])
    assert tr.inputs.shape == (5, 1500) and te.inputs.shape == (5, 894)
    assert (tr.role, te.role) == ("train", "test")


def test_csv_missing_column(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, {"a": np.ones(5)})
    with pytest.raises(CsvFormatError, match="missing column 'y'"):
        load_csv(p, CsvSchema(["a"], ["y"]), [-1])


def test_csv_non_numeric_cell_reports_row_and_column(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\n1,2\n3,oops\n")
    with pytest.raises(CsvFormatError, match=r"d.csv:3: column 'y'"):
        read_csv_columns(p)


def test_csv_ragged_row(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("a,y\n1,2\n3\n")
    with pytest.raises(CsvFormatError, match=":3: expected 2 cells"):
        read_csv_columns(p)


def test_csv_split_out_of_range(tmp_path):
    p = tmp_path / "d.csv"
    write_csv(p, {"a": np.ones(10), "y": np.arange(10.0)})
    with pytest.raises(CsvFormatError, match="out of range"):
        load_csv(p, CsvSchema(["a"], ["y"]), [8, 5])


def test_schema_rejects_target_leak():
    with pytest.raises(ValueError, match="lag-0"):
        CsvSchema(["y"], ["y"])
    CsvSchema([("y", 1)], ["y"])
    CsvSchema(["y"], ["y"], allow_target_leak=True)


def test_csv_normalisation_uses_training_statistics(tmp_path, rng):
    p = tmp_path / "d.csv"
    write_csv(p, {"a": rng.normal(5, 2, 100), "y": rng.normal(-3, 4, 100)})
    tr, te = load_csv(p, CsvSchema(["a"], ["y"]), [60, 40], normalize=True)
    assert abs(tr.inputs.mean()) < 1e-12 and tr.inputs.std() == pytest.approx(1.0)
    assert abs(te.inputs.mean()) > 1e-6


@settings(max_examples=50)
@given(st.lists(st.floats(allow_nan=False, allow_infinity=False, width=64), min_size=1, max_size=30), st.integers(0, 3))
def test_csv_round_trip_property(tmp_path_factory, values, lag):
    p = tmp_path_factory.mktemp("csv") / "r.csv"
    v = np.array(values)
    write_csv(p, {"x": v, "y": v[::-1].copy()})
    cols = read_csv_columns(p)
    np.testing.assert_array_equal(cols["x"], v)
    if v.size > lag:
        (ds,) = load_csv(p, CsvSchema([("x", lag)], ["y"]), [-1])
        np.testing.assert_array_equal(ds.inputs[0], v[: v.size - lag])
        np.testing.assert_array_equal(ds.targets[0], v[::-1][lag:])


# ------------------------------------------------------------------ noise


def make_ds(rng, n=10_000):
    return TimeSeriesDataset(rng.standard_normal((2, n)), rng.normal(0, 3, (1, n)), 0, "x", "test")


def test_zero_noise_is_identity(rng):
    ds = make_ds(rng, 100)
    out = add_gaussian_noise(ds, 0.0, seed=1)
    np.testing.assert_array_equal(out.targets, ds.targets)
    np.testing.assert_array_equal(out.inputs, ds.inputs)


def test_noise_std_matches_request(rng):
    ds = make_ds(rng)
    out = add_gaussian_noise(ds, 0.05, seed=2, perturb_inputs=True, role="validation")
    noise = out.targets - ds.targets
    assert abs(noise.std() / (0.05 * ds.targets.std()) - 1) < 0.1
    assert abs((out.inputs - ds.inputs).std() / 0.05 - 1) < 0.1
    assert out.role == "validation"


def test_noise_is_seeded(rng):
    ds = make_ds(rng, 100)
    np.testing.assert_array_equal(add_gaussian_noise(ds, 0.1, seed=3).targets, add_gaussian_noise(ds, 0.1, seed=3).targets)
    with pytest.raises(ValueError):
        add_gaussian_noise(ds, -0.1)


def test_dataset_invariants():
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.ones((1, 5)), np.ones((1, 4)))
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.ones((1, 5)), np.ones((1, 5)), washout=5)
    with pytest.raises(ValueError):
        TimeSeriesDataset(np.ones((1, 5)), np.ones((1, 5)), role="holdout")
