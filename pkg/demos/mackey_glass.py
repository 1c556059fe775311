"""Grow a three-layer DeepRSCN on one-step Mackey-Glass prediction and compare it with an ESN.

    python demos/mackey_glass.py [seed]
"""

import sys

import numpy as np

from deeprscn import (
    EsnConfig,
    RscConfig,
    build_esn,
    build_mg_task,
    construct_deep_rscn,
    generate_mackey_glass,
    nrmse,
    predict_esn,
    train_esn,
)


def main(seed=0):
    train, val, test = build_mg_task(generate_mackey_glass(), "MG")
    w = test.washout

    result = construct_deep_rscn(RscConfig(max_nodes=(25, 25, 8), seed=seed), train, val)
    deep = nrmse(result.model.predict(test.inputs)[:, w:], test.targets[:, w:])
    print(f"DeepRSCN layers {result.model.layer_sizes}, stopped by {result.stop_reason}")
    print(f"  certificate violations: {result.certificate_violations}")

    esn = train_esn(build_esn(EsnConfig(96, train.input_dim), np.random.default_rng(seed)), train)
    shallow = nrmse(predict_esn(esn, test.inputs)[:, w:], test.targets[:, w:])

    print(f"test NRMSE  DeepRSCN {deep:.5f}   ESN(96) {shallow:.5f}")


if __name__ == "__main__":
    main(int(sys.argv[1]) if len(sys.argv) > 1 else 0)
