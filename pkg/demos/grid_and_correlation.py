"""Pick the candidate pool size by validation NRMSE, then inspect how each layer relates to the target."""

from deeprscn.harness import (
    ExperimentConfig,
    fit_model,
    grid_search,
    load_task,
    node_output_correlation,
    trial_rng,
)

cfg = ExperimentConfig(task="mg", family="DeepRSCN3", sizes=(20, 20, 6))
res = grid_search(cfg, {"rsc.g_max": [10, 50, 100]}, trials=3, threads=3)
for row in res.curve_rows():
    print(row)
print("best", res.best_params)

cfg = ExperimentConfig.from_dict({**cfg.to_dict(), "rsc": {**cfg.rsc, **{"g_max": res.best_params["rsc.g_max"]}}})
splits = load_task(cfg)
model = fit_model(cfg, splits, trial_rng(cfg.base_seed, 0))
corr = node_output_correlation(model, splits.test)
for i, c in enumerate(corr.layer_mean_abs, 1):
    print(f"layer {i}: mean |corr| with target {c:.3f}")
