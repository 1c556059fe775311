"""Benchmark series, task construction, CSV ingestion and noise injection."""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Sequence

import numpy as np

ROLES = ("train", "validation", "test")


@dataclass(frozen=True)
class TimeSeriesDataset:
    """Aligned input/target matrices with shapes ``(K, n)`` and ``(L, n)``.

    The first ``washout`` columns only warm up the reservoir; they are never
    fitted or scored.
    """

    inputs: np.ndarray
    targets: np.ndarray
    washout: int = 0
    name: str = ""
    role: str = "train"

    def __post_init__(self):
        u = np.asarray(self.inputs, dtype=float)
        t = np.asarray(self.targets, dtype=float)
        if u.ndim == 1:
            u = u[None, :]
        if t.ndim == 1:
            t = t[None, :]
        if u.shape[1] != t.shape[1]:
            raise ValueError(f"inputs have {u.shape[1]} samples, targets {t.shape[1]}")
        if not 0 <= self.washout < u.shape[1]:
            raise ValueError(f"washout {self.washout} must be in [0, {u.shape[1]})")
        if self.role not in ROLES:
            raise ValueError(f"role must be one of {ROLES}")
        object.__setattr__(self, "inputs", u)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[1]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[0]

    @property
    def output_dim(self) -> int:
        return self.targets.shape[0]

    @property
    def scored_targets(self) -> np.ndarray:
        return self.targets[:, self.washout:]


@dataclass(frozen=True)
class TaskSplits:
    train: TimeSeriesDataset
    validation: TimeSeriesDataset
    test: TimeSeriesDataset

    def __iter__(self):
        return iter((self.train, self.validation, self.test))


# ---------------------------------------------------------------- Mackey-Glass


@dataclass(frozen=True)
class MgConfig:
    upsilon: float = -0.1
    alpha_mg: float = 0.2
    tau_delay: float = 17.0
    exponent: float = 10.0
    init_range: tuple = (0.1, 1.3)
    integration_step: float = 0.1
    total_points: int = 1177
    constant_history: float | None = None
    history_sampling: str = "grid"
    seed: int = 0

    def __post_init__(self):
        if self.history_sampling not in ("grid", "unit"):
            raise ValueError("history_sampling must be 'grid' or 'unit'")
        if self.tau_delay <= 0:
            raise ValueError("tau_delay must be positive")
        if self.total_points <= self.tau_delay:
            raise ValueError("total_points must exceed tau_delay")


def generate_mackey_glass(cfg: MgConfig = MgConfig()) -> np.ndarray:
    """Integrate the delayed Mackey-Glass equation with the explicit midpoint rule.

    The history on ``[0, tau]`` is drawn i.i.d. from ``init_range`` at every
    grid point (or held at ``constant_history``). Delayed values off the grid
    are linearly interpolated. Returns ``total_points`` samples at t = 0, 1, ...
    """
    h = cfg.integration_step
    steps_per_unit = round(1.0 / h)
    if h <= 0 or abs(steps_per_unit * h - 1.0) > 1e-12:
        raise ValueError(f"integration step {h} must divide 1 evenly")
    h = 1.0 / steps_per_unit
    n_hist = int(round(cfg.tau_delay * steps_per_unit))
    if abs(n_hist * h - cfg.tau_delay) > 1e-9:
        raise ValueError("tau_delay must be a multiple of the integration step")

    n_grid = (cfg.total_points - 1) * steps_per_unit + 1
    y = np.empty(max(n_grid, n_hist + 1))
    if cfg.constant_history is not None:
        y[: n_hist + 1] = cfg.constant_history
    else:
        rng = np.random.default_rng(cfg.seed)
        if cfg.history_sampling == "grid":
            y[: n_hist + 1] = rng.uniform(*cfg.init_range, size=n_hist + 1)
        else:
            # one draw per unit time, joined linearly
            knots = np.arange(int(np.ceil(cfg.tau_delay - 1e-9)) + 1, dtype=float)
            values = rng.uniform(*cfg.init_range, size=knots.size)
            y[: n_hist + 1] = np.interp(np.arange(n_hist + 1) * h, knots, values)

    def rhs(y_now, y_delayed):
        return cfg.upsilon * y_now + cfg.alpha_mg * y_delayed / (1.0 + y_delayed**cfg.exponent)

    for i in range(n_hist, n_grid - 1):
        # delayed index i - n_hist is on the grid; the half step sits between grid points
        d0 = y[i - n_hist]
        d_half = 0.5 * (d0 + y[i - n_hist + 1])
        k1 = rhs(y[i], d0)
        k2 = rhs(y[i] + 0.5 * h * k1, d_half)
        y[i + 1] = y[i] + h * k2
    return y[:n_grid:steps_per_unit][: cfg.total_points].copy()


MG_LAGS = {
    "MG": (0, 6, 12, 18),
    "MG1": (6, 12, 18),
    "MG2": (12, 18),
}
MG_HORIZON = 6
MG_MAX_LAG = 18


def build_mg_task(
    series: np.ndarray,
    variant: str = "MG",
    n_train: int = 500,
    n_validation: int = 300,
    washout: int = 20,
) -> TaskSplits:
    """Lagged-input prediction of ``y(n + 6)``.

    Samples are indexed over constructed (input, target) pairs: pair 1 is the
    first n with all lags available. Pairs 1-500 train, 501-800 validate, the
    rest test.
    """
    if variant not in MG_LAGS:
        raise ValueError(f"unknown MG variant {variant!r}; choose from {sorted(MG_LAGS)}")
    series = np.asarray(series, dtype=float).reshape(-1)
    lags = MG_LAGS[variant]
    idx = np.arange(MG_MAX_LAG, series.size - MG_HORIZON)
    if idx.size < n_train + n_validation + washout + 1:
        raise ValueError(f"series of length {series.size} is too short for the {variant} task")
    inputs = np.stack([series[idx - lag] for lag in lags])
    targets = series[idx + MG_HORIZON][None, :]
    cuts = [0, n_train, n_train + n_validation, idx.size]
    parts = [
        TimeSeriesDataset(inputs[:, a:b], targets[:, a:b], washout, variant, role)
        for (a, b), role in zip(zip(cuts[:-1], cuts[1:]), ROLES)
    ]
    return TaskSplits(*parts)


# ----------------------------------------------------- nonlinear plant (sysid)


@dataclass(frozen=True)
class SysIdConfig:
    train_length: int = 2000
    val_length: int = 1000
    test_length: int = 1000
    initial_outputs: tuple = (0.0, 0.0, 0.0, 0.1)
    washout: int = 100
    seed: int = 0

    def __post_init__(self):
        if min(self.train_length, self.val_length, self.test_length) <= 0:
            raise ValueError("lengths must be positive")


def plant_step(y_n, y_nm1, u_nm1, u_nm2, u_nm3):
    return 0.72 * y_n + 0.025 * y_nm1 * u_nm1 + 0.01 * u_nm2**2 + 0.2 * u_nm3


def simulate_plant(u: np.ndarray, initial_outputs=(0.0, 0.0, 0.0, 0.1)) -> np.ndarray:
    """Simulate the plant for the input sequence ``u(1..m)``.

    Returns ``y(1..m+1)`` as a 0-based array where ``y[k]`` holds y(k+1).
    """
    u = np.asarray(u, dtype=float).reshape(-1)
    m = u.size
    y = np.zeros(m + 1)
    k0 = len(initial_outputs)
    y[:k0] = initial_outputs
    for k in range(k0 - 1, m):
        # y[k] is y(n) with n = k + 1
        y[k + 1] = plant_step(y[k], y[k - 1], u[k - 1], u[k - 2], u[k - 3])
    return y


def sysid_test_input(n: np.ndarray) -> np.ndarray:
    """Piecewise test excitation for n = 1..1000."""
    n = np.asarray(n, dtype=float)
    mixed = 0.6 * np.cos(np.pi * n / 10) + 0.1 * np.cos(np.pi * n / 32) + 0.3 * np.sin(np.pi * n / 25)
    return np.select(
        [n < 250, n < 500, n < 750],
        [np.sin(np.pi * n / 25), np.ones_like(n), -np.ones_like(n)],
        mixed,
    )


def _sysid_set(u: np.ndarray, cfg: SysIdConfig, role: str) -> TimeSeriesDataset:
    y = simulate_plant(u, cfg.initial_outputs)
    inputs = np.stack([y[:-1], u])
    targets = y[1:][None, :]
    return TimeSeriesDataset(inputs, targets, cfg.washout, "sysid", role)


def generate_sysid(cfg: SysIdConfig = SysIdConfig()) -> TaskSplits:
    """One-step-ahead identification of the plant: (y(n), u(n)) -> y(n+1).

    Each split is simulated separately from the fixed initial outputs; training
    and validation are excited by U[-1, 1] noise, testing by the piecewise
    schedule.
    """
    rng = np.random.default_rng(cfg.seed)
    u_train = rng.uniform(-1, 1, cfg.train_length)
    u_val = rng.uniform(-1, 1, cfg.val_length)
    u_test = sysid_test_input(np.arange(1, cfg.test_length + 1))
    return TaskSplits(
        _sysid_set(u_train, cfg, "train"),
        _sysid_set(u_val, cfg, "validation"),
        _sysid_set(u_test, cfg, "test"),
    )


# ------------------------------------------------------------------------- CSV


class CsvFormatError(ValueError):
    pass


@dataclass(frozen=True)
class CsvSchema:
    """Which columns (at which lags) become inputs and targets.

    ``inputs`` and ``targets`` are sequences of ``(column, lag)`` pairs; a bare
    column name means lag 0. A lag-0 input that is also a lag-0 target is
    rejected unless ``allow_target_leak`` is set.
    """

    inputs: tuple
    targets: tuple
    allow_target_leak: bool = False

    def __post_init__(self):
        norm = lambda items: tuple((c, 0) if isinstance(c, str) else (str(c[0]), int(c[1])) for c in items)
        ins, outs = norm(self.inputs), norm(self.targets)
        if not ins or not outs:
            raise ValueError("schema needs at least one input and one target")
        if any(lag < 0 for _, lag in ins + outs):
            raise ValueError("lags must be non-negative")
        if not self.allow_target_leak and set(ins) & {(c, 0) for c, lag in outs if lag == 0}:
            raise ValueError("a lag-0 target column is also a lag-0 input")
        object.__setattr__(self, "inputs", ins)
        object.__setattr__(self, "targets", outs)

    @property
    def max_lag(self) -> int:
        return max(lag for _, lag in self.inputs + self.targets)


def read_csv_columns(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise CsvFormatError(f"{path}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            if len(row) != len(header):
                raise CsvFormatError(f"{path}:{lineno}: expected {len(header)} cells, found {len(row)}")
            values = []
            for col, cell in zip(header, row):
                try:
                    values.append(float(cell))
                except ValueError:
                    raise CsvFormatError(f"{path}:{lineno}: column {col!r} has non-numeric value {cell!r}") from None
            rows.append(values)
    data = np.array(rows, dtype=float).reshape(-1, len(header))
    return {name: data[:, j] for j, name in enumerate(header)}


def load_csv(
    path,
    schema: CsvSchema,
    splits: Sequence[int],
    washout: int | Sequence[int] = 0,
    normalize: bool = False,
    name: str | None = None,
) -> list[TimeSeriesDataset]:
    """Materialise lagged regressors from a CSV file and split them in time.

    Args:
        splits: Consecutive split lengths over the usable rows (rows left after
            dropping the first ``max_lag`` rows). Lengths map to the roles
            train, validation, test in order; two lengths map to train, test.
            A final ``-1`` takes the remainder.
        washout: One value for every split, or one per split.
        normalize: z-score each column with training-split statistics.
    """
    columns = read_csv_columns(path)
    for col, _ in schema.inputs + schema.targets:
        if col not in columns:
            raise CsvFormatError(f"{path}: missing column {col!r}; available: {sorted(columns)}")
    n_rows = len(next(iter(columns.values()))) if columns else 0
    lag = schema.max_lag
    usable = n_rows - lag
    if usable <= 0:
        raise CsvFormatError(f"{path}: {n_rows} rows cannot support lag {lag}")

    def block(items):
        return np.stack([columns[c][lag - k : n_rows - k] for c, k in items])

    inputs, targets = block(schema.inputs), block(schema.targets)

    lengths = list(splits)
    if lengths and lengths[-1] == -1:
        lengths[-1] = usable - sum(lengths[:-1])
    if any(n <= 0 for n in lengths) or sum(lengths) > usable:
        raise CsvFormatError(f"{path}: splits {list(splits)} out of range for {usable} usable rows")
    roles = ("train", "test") if len(lengths) == 2 else ROLES[: len(lengths)]
    washouts = [washout] * len(lengths) if isinstance(washout, int) else list(washout)
    if len(washouts) != len(lengths):
        raise ValueError("need one washout per split")

    if normalize:
        n0 = lengths[0]
        mu_u, sd_u = inputs[:, :n0].mean(1, keepdims=True), inputs[:, :n0].std(1, keepdims=True)
        mu_t, sd_t = targets[:, :n0].mean(1, keepdims=True), targets[:, :n0].std(1, keepdims=True)
        inputs = (inputs - mu_u) / np.where(sd_u > 0, sd_u, 1.0)
        targets = (targets - mu_t) / np.where(sd_t > 0, sd_t, 1.0)

    out = []
    start = 0
    label = name or Path(path).stem
    for n, role, wo in zip(lengths, roles, washouts):
        out.append(TimeSeriesDataset(inputs[:, start : start + n], targets[:, start : start + n], wo, label, role))
        start += n
    return out


def write_csv(path, columns: dict[str, np.ndarray]) -> None:
    names = list(columns)
    data = np.column_stack([np.asarray(columns[c], dtype=float) for c in names]) if names else np.zeros((0, 0))
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(names)
        for row in data:
            writer.writerow([repr(float(v)) for v in row])


# ----------------------------------------------------------------------- noise


def add_gaussian_noise(
    dataset: TimeSeriesDataset,
    sigma_ratio: float = 0.05,
    seed: int | None = None,
    perturb_inputs: bool = False,
    role: str | None = None,
) -> TimeSeriesDataset:
    """Copy of ``dataset`` with zero-mean Gaussian noise on the targets.

    The noise std of each channel is ``sigma_ratio`` times that channel's std.
    """
    if sigma_ratio < 0:
        raise ValueError("sigma_ratio must be non-negative")
    rng = np.random.default_rng(seed)

    def noisy(a):
        sd = a.std(axis=1, keepdims=True)
        return a + rng.standard_normal(a.shape) * (sigma_ratio * sd)

    targets = noisy(dataset.targets) if sigma_ratio > 0 else dataset.targets.copy()
    inputs = noisy(dataset.inputs) if (perturb_inputs and sigma_ratio > 0) else dataset.inputs.copy()
    return replace(dataset, inputs=inputs, targets=targets, role=role or dataset.role)
