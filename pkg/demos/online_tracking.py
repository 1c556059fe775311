"""Track a plant whose input gain drifts, with and without projection updates of the readout."""

from deeprscn.harness import online_demo
from deeprscn.readout import ProjectionConfig

for gain in (0.1, 0.5, 1.0):
    res = online_demo(seed=0, projection=ProjectionConfig(gain, 1e-4))
    print(f"a={gain:<4}  fixed readout {res.static_nrmse:.4f}  projection {res.online_nrmse:.4f}")
