"""Experiment orchestration: scoring, seeded multi-trial runs, grid search and reports."""

from __future__ import annotations

import csv
import dataclasses
import json
import logging
import math
import statistics
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

import numpy as np

from .construction import ConfigurationError, DeepModel, RscConfig, construct_deep_rscn
from .datasets import (
    CsvSchema,
    MgConfig,
    SysIdConfig,
    TaskSplits,
    TimeSeriesDataset,
    add_gaussian_noise,
    build_mg_task,
    generate_mackey_glass,
    generate_sysid,
    load_csv,
    plant_step,
)
from .esn import (
    EsnConfig,
    EsnModel,
    build_and_train_deep_esn,
    build_esn,
    deep_esn_configs,
    predict_esn,
    train_esn,
)
from .readout import ProjectionConfig, online_run
from .reservoir import NilpotentMatrixError, rollout_layer

logger = logging.getLogger(__name__)

FAMILIES = ("ESN", "DeepESN2", "DeepESN3", "RSCN", "DeepRSCN2", "DeepRSCN3")
TASKS = ("mg", "mg1", "mg2", "sysid", "csv")

#: Reservoir sizes of the published comparison tables, per benchmark.
PRESET_SIZES = {
    "mg": {
        "ESN": (96,),
        "DeepESN2": (72, 13),
        "DeepESN3": (48, 19, 12),
        "RSCN": (67,),
        "DeepRSCN2": (40, 22),
        "DeepRSCN3": (25, 25, 8),
    },
    "sysid": {
        "ESN": (157,),
        "DeepESN2": (59, 45),
        "DeepESN3": (37, 33, 28),
        "RSCN": (102,),
        "DeepRSCN2": (60, 18),
        "DeepRSCN3": (40, 40, 5),
    },
}

# failures that exclude a trial instead of aborting the run
TRIAL_ERRORS = (ConfigurationError, NilpotentMatrixError, np.linalg.LinAlgError, FloatingPointError)


def nrmse(predictions, targets) -> float:
    """Root mean squared error over the target variance.

    ``sqrt(sum_n ||y(n) - t(n)||^2 / (n * var))`` where ``var`` is the mean of
    the per-channel population variances. Inputs are ``(L, n)`` or 1-D.

    Raises:
        ValueError: on shape mismatch, fewer than two samples, or constant targets.
    """
    y = np.atleast_2d(np.asarray(predictions, dtype=float))
    t = np.atleast_2d(np.asarray(targets, dtype=float))
    if y.shape != t.shape:
        raise ValueError(f"predictions have shape {y.shape}, targets {t.shape}")
    n = t.shape[1]
    if n < 2:
        raise ValueError("nrmse needs at least two samples")
    var = float(np.mean(t.var(axis=1)))
    if var <= 0:
        raise ValueError("targets have zero variance; nrmse is undefined")
    return math.sqrt(float(np.sum((y - t) ** 2)) / (n * var))


def family_layers(family: str) -> int:
    if family not in FAMILIES:
        raise ValueError(f"unknown model family {family!r}; choose from {', '.join(FAMILIES)}")
    return int(family[-1]) if family[-1].isdigit() else 1


def preset_sizes(task: str, family: str) -> tuple:
    table = "sysid" if task == "sysid" else "mg"
    return PRESET_SIZES[table][family]


# ------------------------------------------------------------------- config


@dataclass(frozen=True)
class CsvTaskConfig:
    path: str = ""
    inputs: tuple = ()
    targets: tuple = ()
    splits: tuple = (-1,)
    washout: int = 0
    normalize: bool = False


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything needed to rerun a batch of trials.

    ``sizes`` overrides the per-layer reservoir sizes; when empty the
    benchmark preset for ``task`` and ``family`` is used. ``esn`` and ``rsc``
    hold keyword overrides for :class:`EsnConfig` and :class:`RscConfig`.
    """

    task: str = "mg"
    family: str = "DeepRSCN3"
    sizes: tuple = ()
    trial_count: int = 30
    base_seed: int = 0
    data_seed: int | None = None
    esn: dict = field(default_factory=dict)
    rsc: dict = field(default_factory=dict)
    mg: dict = field(default_factory=dict)
    sysid: dict = field(default_factory=dict)
    csv: CsvTaskConfig = field(default_factory=CsvTaskConfig)
    online: bool = False
    projection: ProjectionConfig = field(default_factory=ProjectionConfig)
    out: str = ""

    def __post_init__(self):
        if self.task not in TASKS:
            raise ValueError(f"unknown task {self.task!r}; choose from {', '.join(TASKS)}")
        family_layers(self.family)
        if self.trial_count < 1:
            raise ValueError("trial_count must be at least 1")
        sizes = tuple(int(s) for s in self.sizes)
        if sizes and len(sizes) != family_layers(self.family):
            raise ValueError(f"{self.family} needs {family_layers(self.family)} layer sizes, got {len(sizes)}")
        object.__setattr__(self, "sizes", sizes)
        # reject bad overrides early
        _check_keys(self.esn, EsnConfig, "esn", exclude={"reservoir_size", "input_dim", "output_dim"})
        _check_keys(self.rsc, RscConfig, "rsc", exclude={"max_nodes"})
        _check_keys(self.mg, MgConfig, "mg")
        _check_keys(self.sysid, SysIdConfig, "sysid")

    @property
    def layer_sizes(self) -> tuple:
        return self.sizes or preset_sizes(self.task, self.family)

    @property
    def is_rsc(self) -> bool:
        return "RSCN" in self.family

    def rsc_config(self, seed: int = 0) -> RscConfig:
        return RscConfig(max_nodes=self.layer_sizes, seed=seed, **self.rsc)

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> ExperimentConfig:
        """Build from nested plain data; unknown keys raise ``ValueError``."""
        _check_keys(data, cls, "config")
        kw = dict(data)
        if "csv" in kw:
            _check_keys(kw["csv"], CsvTaskConfig, "csv")
            c = dict(kw["csv"])
            for key in ("inputs", "targets"):
                if key in c:
                    c[key] = tuple(tuple(v) if isinstance(v, list) else v for v in c[key])
            if "splits" in c:
                c["splits"] = tuple(c["splits"])
            kw["csv"] = CsvTaskConfig(**c)
        if "projection" in kw:
            _check_keys(kw["projection"], ProjectionConfig, "projection")
            kw["projection"] = ProjectionConfig(**kw["projection"])
        for key in ("esn", "rsc", "mg", "sysid"):
            if key in kw:
                kw[key] = dict(kw[key])
        if "sizes" in kw:
            kw["sizes"] = tuple(kw["sizes"])
        return cls(**kw)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)


def _check_keys(data, cls, where: str, exclude=()) -> None:
    if not isinstance(data, Mapping):
        raise ValueError(f"{where}: expected a mapping, got {type(data).__name__}")
    allowed = {f.name for f in dataclasses.fields(cls)} - set(exclude)
    unknown = sorted(set(data) - allowed)
    if unknown:
        raise ValueError(f"{where}: unknown key(s) {', '.join(unknown)}")


def load_task(cfg: ExperimentConfig) -> TaskSplits:
    """Generate or load the datasets named by ``cfg.task``."""
    seed = cfg.base_seed if cfg.data_seed is None else cfg.data_seed
    if cfg.task.startswith("mg"):
        mg = {"seed": seed, **cfg.mg}
        return build_mg_task(generate_mackey_glass(MgConfig(**mg)), cfg.task.upper())
    if cfg.task == "sysid":
        return generate_sysid(SysIdConfig(**{"seed": seed, **cfg.sysid}))
    c = cfg.csv
    if not c.path:
        raise ValueError("csv task needs csv.path")
    schema = CsvSchema(c.inputs, c.targets)
    parts = load_csv(c.path, schema, c.splits, c.washout, normalize=c.normalize)
    if len(parts) == 3:
        return TaskSplits(*parts)
    if len(parts) == 2:
        # no validation rows: use a noisy copy of the test split, as for industrial soft sensors
        return TaskSplits(parts[0], add_gaussian_noise(parts[1], seed=seed, role="validation"), parts[1])
    raise ValueError("csv.splits must give two or three split lengths")


# ------------------------------------------------------------------- models


@dataclass
class FittedModel:
    """A trained model of any family behind one prediction interface."""

    family: str
    model: Any
    sizes: tuple
    construction: Any = None

    def predict(self, inputs) -> np.ndarray:
        if isinstance(self.model, EsnModel):
            return predict_esn(self.model, inputs)
        return self.model.predict(inputs)

    def predict_online(self, dataset: TimeSeriesDataset, cfg: ProjectionConfig) -> np.ndarray:
        """Prequential predictions with the readout adapted after every step."""
        if not isinstance(self.model, (EsnModel, DeepModel)):
            raise ValueError("online readout updates need a single readout (ESN or RSC families)")
        feats = self.model.features(dataset.inputs)
        return online_run(feats, dataset.targets, self.model.readout, cfg).predictions

    def layer_states(self, inputs) -> list[np.ndarray]:
        inputs = np.atleast_2d(np.asarray(inputs, dtype=float))
        if isinstance(self.model, DeepModel):
            return self.model.layer_states(inputs)
        if isinstance(self.model, EsnModel):
            return [rollout_layer(self.model.layer, inputs).states]
        out, drive = [], inputs
        for m in self.model.layers:
            states = rollout_layer(m.layer, drive).states
            out.append(states)
            drive = np.vstack([m.readout.apply(np.vstack([states, inputs])), inputs])
        return out


def fit_model(cfg: ExperimentConfig, splits: TaskSplits, rng: np.random.Generator) -> FittedModel:
    train, val = splits.train, splits.validation
    sizes = cfg.layer_sizes
    if cfg.is_rsc:
        result = construct_deep_rscn(cfg.rsc_config(), train, val, rng=rng)
        return FittedModel(cfg.family, result.model, result.model.layer_sizes, result)
    if len(sizes) == 1:
        ecfg = EsnConfig(sizes[0], train.input_dim, train.output_dim, **cfg.esn)
        model = train_esn(build_esn(ecfg, rng), train)
        return FittedModel(cfg.family, model, sizes)
    configs = deep_esn_configs(sizes, train.input_dim, train.output_dim, **cfg.esn)
    model = build_and_train_deep_esn(configs, train, rng)
    return FittedModel(cfg.family, model, sizes)


def score(model: FittedModel, dataset: TimeSeriesDataset) -> float:
    pred = model.predict(dataset.inputs)[:, dataset.washout :]
    return nrmse(pred, dataset.scored_targets)


# ------------------------------------------------------------------- trials


def trial_rng(base_seed: int, index: int) -> np.random.Generator:
    """Independent generator for trial ``index`` of a run seeded with ``base_seed``."""
    return np.random.default_rng([int(base_seed), int(index)])


@dataclass
class TrialResult:
    trial: int
    sizes: tuple
    train_time: float = float("nan")
    train_nrmse: float = float("nan")
    validation_nrmse: float = float("nan")
    test_nrmse: float = float("nan")
    stop_reason: str = ""
    certificate_violations: int = 0
    monotone_violations: int = 0
    error: str = ""
    log: list = field(default_factory=list, repr=False)
    model: FittedModel | None = field(default=None, repr=False, compare=False)

    @property
    def ok(self) -> bool:
        return not self.error

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "trial": self.trial,
            "sizes": list(self.sizes),
            "train_nrmse": self.train_nrmse,
            "validation_nrmse": self.validation_nrmse,
            "test_nrmse": self.test_nrmse,
            "stop_reason": self.stop_reason,
            "certificate_violations": self.certificate_violations,
            "monotone_violations": self.monotone_violations,
            "error": self.error,
        }
        if timings:
            d["train_time"] = self.train_time
        return d


def run_trial(
    cfg: ExperimentConfig,
    splits: TaskSplits,
    index: int,
    clock: Callable[[], float] = time.perf_counter,
) -> TrialResult:
    """Build, time and score one trial. Only model fitting sits inside the timer."""
    rng = trial_rng(cfg.base_seed, index)
    try:
        t0 = clock()
        fitted = fit_model(cfg, splits, rng)
        elapsed = clock() - t0
    except TRIAL_ERRORS as exc:
        log = getattr(exc, "log", [])
        return TrialResult(index, cfg.layer_sizes, error=f"{type(exc).__name__}: {exc}", log=log)
    res = TrialResult(
        index,
        tuple(fitted.sizes),
        train_time=elapsed,
        train_nrmse=score(fitted, splits.train),
        validation_nrmse=score(fitted, splits.validation),
        test_nrmse=score(fitted, splits.test),
        model=fitted,
    )
    if cfg.online:
        t = splits.test
        res.test_nrmse = nrmse(fitted.predict_online(t, cfg.projection)[:, t.washout :], t.scored_targets)
    if fitted.construction is not None:
        c = fitted.construction
        res.stop_reason = c.stop_reason
        res.certificate_violations = c.certificate_violations
        res.monotone_violations = c.monotone_violations
        res.log = c.log
    return res


def _mean_std(values) -> tuple[float, float]:
    # statistics works in exact arithmetic, so identical trials give std 0 exactly
    v = [float(x) for x in values]
    if not v:
        return float("nan"), float("nan")
    return statistics.fmean(v), statistics.stdev(v) if len(v) > 1 else 0.0


@dataclass
class ReportRow:
    """Aggregate of one model's trials: mean and sample std of each metric."""

    model: str
    size: str
    trials: int
    failed: int
    train_time: tuple
    train_nrmse: tuple
    test_nrmse: tuple
    median_test_nrmse: float
    note: str = ""

    @classmethod
    def from_results(cls, family: str, results: Sequence[TrialResult]) -> ReportRow:
        ok = [r for r in results if r.ok]
        failed = len(results) - len(ok)
        sizes = sorted({r.sizes for r in ok}) or sorted({r.sizes for r in results})
        size = ", ".join("-".join(str(s) for s in sz) for sz in sizes[:1])
        if len(sizes) > 1:
            # early stopping can leave trials at different sizes; report the mean per layer
            mean = np.mean([r.sizes + (0,) * (max(map(len, sizes)) - len(r.sizes)) for r in ok], axis=0)
            size = "-".join(f"{m:.1f}" for m in mean) + " (mean)"
        tests = [r.test_nrmse for r in ok]
        return cls(
            model=family,
            size=size,
            trials=len(ok),
            failed=failed,
            train_time=_mean_std([r.train_time for r in ok]),
            train_nrmse=_mean_std([r.train_nrmse for r in ok]),
            test_nrmse=_mean_std(tests),
            median_test_nrmse=float(np.median(tests)) if tests else float("nan"),
            note=f"{failed} failed trial(s) excluded" if failed else "",
        )

    def to_dict(self, timings: bool = True) -> dict:
        d = {
            "model": self.model,
            "size": self.size,
            "trials": self.trials,
            "failed": self.failed,
            "train_nrmse_mean": self.train_nrmse[0],
            "train_nrmse_std": self.train_nrmse[1],
            "test_nrmse_mean": self.test_nrmse[0],
            "test_nrmse_std": self.test_nrmse[1],
            "test_nrmse_median": self.median_test_nrmse,
            "note": self.note,
        }
        if timings:
            d["train_time_mean"] = self.train_time[0]
            d["train_time_std"] = self.train_time[1]
        return d


def run_trials(
    cfg: ExperimentConfig,
    threads: int = 1,
    splits: TaskSplits | None = None,
    clock: Callable[[], float] = time.perf_counter,
) -> tuple[list[TrialResult], ReportRow]:
    """Run ``cfg.trial_count`` seeded trials and aggregate them.

    Trials may run concurrently; results are always ordered by trial index so
    the aggregate does not depend on scheduling. Failed trials are kept in the
    returned list, left out of the aggregate, and reported with a warning.
    """
    splits = load_task(cfg) if splits is None else splits
    indices = range(cfg.trial_count)
    if threads > 1 and cfg.trial_count > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            results = list(pool.map(lambda i: run_trial(cfg, splits, i, clock), indices))
    else:
        results = [run_trial(cfg, splits, i, clock) for i in indices]
    failed = [r for r in results if not r.ok]
    if failed:
        warnings.warn(
            f"{cfg.family}: {len(failed)} of {len(results)} trials failed and were excluded "
            f"(first: {failed[0].error})",
            RuntimeWarning,
            stacklevel=2,
        )
    return results, ReportRow.from_results(cfg.family, results)


# --------------------------------------------------------------- grid search


@dataclass
class GridPoint:
    params: dict
    validation_nrmse: float
    trials: int
    failed: int


@dataclass
class GridResult:
    best: ExperimentConfig
    best_params: dict
    curve: list

    def curve_rows(self) -> list[dict]:
        return [{**p.params, "validation_nrmse": p.validation_nrmse, "trials": p.trials} for p in self.curve]


def _apply_params(cfg: ExperimentConfig, params: Mapping[str, Any]) -> ExperimentConfig:
    """Return ``cfg`` with dotted-path overrides such as ``rsc.g_max`` or ``sizes``."""
    data = cfg.to_dict()
    for key, value in params.items():
        node = data
        *parents, leaf = key.split(".")
        for p in parents:
            node = node[p]
        node[leaf] = value
    return ExperimentConfig.from_dict(data)


def grid_points(space: Mapping[str, Sequence]) -> list[dict]:
    """Cartesian product of ``space`` in row-major order of its keys."""
    keys = list(space)
    points = [{}]
    for k in keys:
        values = list(space[k])
        if not values:
            raise ValueError(f"grid axis {k!r} is empty")
        points = [{**p, k: v} for p in points for v in values]
    return points


def grid_search(
    cfg: ExperimentConfig,
    space: Mapping[str, Sequence],
    trials: int = 5,
    threads: int = 1,
) -> GridResult:
    """Pick the grid point with the lowest mean validation NRMSE.

    Ties go to the earliest point in grid order. Every point is evaluated on
    the same datasets with the same trial seeds.

    Raises:
        ValueError: if the grid is empty or every point fails.
    """
    points = grid_points(space)
    if not points or points == [{}]:
        raise ValueError("grid is empty")
    splits = load_task(cfg)
    curve = []
    for params in points:
        point_cfg = dataclasses.replace(_apply_params(cfg, params), trial_count=trials)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            results, _ = run_trials(point_cfg, threads=threads, splits=splits)
        ok = [r.validation_nrmse for r in results if r.ok]
        value = float(np.mean(ok)) if ok else float("inf")
        curve.append(GridPoint(dict(params), value, len(ok), len(results) - len(ok)))
    finite = [i for i, p in enumerate(curve) if np.isfinite(p.validation_nrmse)]
    if not finite:
        raise ValueError("every grid point failed")
    best = min(finite, key=lambda i: (curve[i].validation_nrmse, i))
    return GridResult(_apply_params(cfg, points[best]), points[best], curve)


# --------------------------------------------------------------- diagnostics


@dataclass
class CorrelationReport:
    per_node: list
    layer_mean_abs: list
    constant_nodes: list


def node_output_correlation(model: FittedModel, dataset: TimeSeriesDataset) -> CorrelationReport:
    """Pearson correlation of every reservoir node with every target channel.

    Uses post-washout columns. A node whose trace is constant gets correlation
    0 and is listed in ``constant_nodes`` as ``(layer, node)``.
    """
    w = dataset.washout
    t = dataset.scored_targets
    tc = t - t.mean(axis=1, keepdims=True)
    t_norm = np.sqrt(np.sum(tc**2, axis=1))
    per_node, means, constant = [], [], []
    for li, states in enumerate(model.layer_states(dataset.inputs)):
        x = states[:, w:]
        xc = x - x.mean(axis=1, keepdims=True)
        x_norm = np.sqrt(np.sum(xc**2, axis=1))
        denom = np.outer(x_norm, t_norm)
        flat = x_norm <= 1e-12 * max(1.0, float(np.abs(x).max(initial=0.0)))
        with np.errstate(invalid="ignore", divide="ignore"):
            corr = np.where(denom > 0, (xc @ tc.T) / np.where(denom > 0, denom, 1.0), 0.0)
        corr[flat] = 0.0
        constant.extend((li + 1, int(j)) for j in np.flatnonzero(flat))
        per_node.append(corr)
        means.append(float(np.mean(np.abs(corr))) if corr.size else float("nan"))
    return CorrelationReport(per_node, means, constant)


# --------------------------------------------------------------- output


def emit_plot_data(rows: Sequence[Mapping[str, Any]], path, fields: Sequence[str] | None = None) -> None:
    """Write ``rows`` as CSV. With no rows only the header is written."""
    rows = list(rows)
    if fields is None:
        fields = list(rows[0]) if rows else []
    with open(path, "w", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=list(fields), lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: _fmt_csv(row[k]) for k in fields})


def _fmt_csv(v):
    return repr(float(v)) if isinstance(v, (float, np.floating)) else v


def prediction_rows(model: FittedModel, dataset: TimeSeriesDataset) -> list[dict]:
    """Post-washout prediction and target per step, one row per step and channel pair."""
    pred = model.predict(dataset.inputs)[:, dataset.washout :]
    t = dataset.scored_targets
    rows = []
    for n in range(t.shape[1]):
        row = {"step": n + dataset.washout}
        for q in range(t.shape[0]):
            row[f"target{q}"] = float(t[q, n])
            row[f"prediction{q}"] = float(pred[q, n])
        rows.append(row)
    return rows


def _pm(pair, digits: int = 5) -> str:
    m, s = pair
    if not np.isfinite(m):
        return "n/a"
    return f"{m:.{digits}f}±{s:.{digits}f}"


def format_table(rows: Sequence[ReportRow], title: str = "", timings: bool = False) -> str:
    """Aligned plain-text table of report rows."""
    header = ["Model", "Reservoir size", "Trials"]
    if timings:
        header.append("Training time (s)")
    header += ["Training NRMSE", "Testing NRMSE", "Median testing NRMSE"]
    body = []
    notes = []
    for r in rows:
        line = [r.model, r.size, str(r.trials)]
        if timings:
            line.append(_pm(r.train_time))
        line += [_pm(r.train_nrmse), _pm(r.test_nrmse), f"{r.median_test_nrmse:.5f}"]
        body.append(line)
        if r.note:
            notes.append(f"{r.model}: {r.note}")
    widths = [max(len(c) for c in col) for col in zip(header, *body)]
    fmt = lambda cells: "  ".join(c.ljust(w) for c, w in zip(cells, widths)).rstrip()
    out = [title] if title else []
    out += [fmt(header), fmt(["-" * w for w in widths])] + [fmt(b) for b in body]
    out += notes
    if timings:
        out.append("Training time: wall clock of one model's construction and readout fit; grid search excluded.")
    return "\n".join(out) + "\n"


def report_payload(title: str, config: Mapping, rows: Sequence[ReportRow], results: Mapping[str, Sequence[TrialResult]]) -> dict:
    """Machine-readable report without any wall-clock data, so it is reproducible byte for byte."""
    return {
        "title": title,
        "config": config,
        "rows": [r.to_dict(timings=False) for r in rows],
        "trials": {k: [t.to_dict(timings=False) for t in v] for k, v in results.items()},
    }


def timing_payload(rows: Sequence[ReportRow], results: Mapping[str, Sequence[TrialResult]]) -> dict:
    return {
        "note": "training time covers model construction and readout fitting only",
        "rows": {r.model: {"mean": r.train_time[0], "std": r.train_time[1]} for r in rows},
        "trials": {k: [t.train_time for t in v] for k, v in results.items()},
    }


def dump_json(obj, path) -> None:
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, tuple):
        return list(o)
    if dataclasses.is_dataclass(o):
        return dataclasses.asdict(o)
    if hasattr(o, "value"):
        return o.value
    raise TypeError(f"cannot serialise {type(o).__name__}")


# --------------------------------------------------------------- benchmarks


@dataclass
class TableRun:
    task: str
    rows: list
    results: dict
    config: dict

    @property
    def title(self) -> str:
        return f"Performance comparison on the {self.task} task"


def reproduce_table(
    task: str,
    trials: int = 30,
    seed: int = 0,
    threads: int = 1,
    families: Sequence[str] = FAMILIES,
    overrides: Mapping[str, Any] | None = None,
) -> TableRun:
    """Run every model family of a benchmark table with its preset sizes."""
    if task not in ("mg", "sysid"):
        raise ValueError("task must be 'mg' or 'sysid'")
    base = {"task": task, "trial_count": trials, "base_seed": seed, **(overrides or {})}
    splits = load_task(ExperimentConfig.from_dict(base))
    rows, results = [], {}
    for fam in families:
        cfg = ExperimentConfig.from_dict({**base, "family": fam})
        res, row = run_trials(cfg, threads=threads, splits=splits)
        rows.append(row)
        results[fam] = res
    return TableRun(task, rows, results, base)


# --------------------------------------------------------------- online demo


def drifting_plant_inputs(n: int, rng: np.random.Generator) -> np.ndarray:
    return rng.uniform(-1, 1, size=n)


def simulate_drifting_plant(u: np.ndarray, drift_start: int, gain_after: float = 0.5) -> np.ndarray:
    """The identification plant whose input gain ramps to ``gain_after`` from ``drift_start`` on.

    Returns outputs ``y`` with ``len(y) == len(u) + 1`` from the standard
    initial outputs.
    """
    y = np.zeros(len(u) + 1)
    y[3] = 0.1
    ramp = 200
    for n in range(3, len(u)):
        frac = min(max(n - drift_start, 0) / ramp, 1.0)
        g = 0.2 + frac * (gain_after - 0.2)
        y[n + 1] = plant_step(y[n], y[n - 1], u[n - 1], u[n - 2], u[n - 3]) + (g - 0.2) * u[n - 3]
    return y


@dataclass
class OnlineDemoResult:
    static_nrmse: float
    online_nrmse: float
    static_predictions: np.ndarray
    online_predictions: np.ndarray
    targets: np.ndarray


def online_demo(
    seed: int = 0,
    sizes: tuple = (40, 40, 5),
    projection: ProjectionConfig = ProjectionConfig(),
    n_stream: int = 1500,
    drift_start: int = 300,
) -> OnlineDemoResult:
    """Train on the identification plant, then track a drifting copy of it.

    The fixed readout is compared with one adapted step by step by the
    projection update. Both are scored after the washout of the stream.
    """
    splits = generate_sysid(SysIdConfig(seed=seed))
    rng = trial_rng(seed, 0)
    result = construct_deep_rscn(RscConfig(max_nodes=sizes), splits.train, splits.validation, rng=rng)
    model = result.model
    u = drifting_plant_inputs(n_stream, np.random.default_rng([seed, 1]))
    y = simulate_drifting_plant(u, drift_start)
    inputs = np.stack([y[:-1], u])
    targets = y[1:][None, :]
    feats = model.features(inputs)
    static = model.readout.apply(feats)
    online = online_run(feats, targets, model.readout, projection)
    w = splits.train.washout
    return OnlineDemoResult(
        nrmse(static[:, w:], targets[:, w:]),
        nrmse(online.predictions[:, w:], targets[:, w:]),
        static,
        online.predictions,
        targets,
    )
