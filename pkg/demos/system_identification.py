"""Identify the nonlinear benchmark plant with several model families over a few seeded trials."""

from deeprscn.harness import ExperimentConfig, format_table, run_trials

FAMILIES = ("ESN", "DeepESN3", "RSCN", "DeepRSCN3")


def main(trials=5):
    rows = []
    for family in FAMILIES:
        cfg = ExperimentConfig(task="sysid", family=family, trial_count=trials)
        _, row = run_trials(cfg, threads=4)
        rows.append(row)
    print(format_table(rows, f"plant identification, {trials} trials", timings=True), end="")


if __name__ == "__main__":
    main()
