"""Hybrid reconstruction: warm-start the EM iteration from a cube file.

The EM initializer is pluggable: "ones", the back-projection, or any HCUB
file. A learned predictor writes its estimate as HCUB and the solver picks
it up, so the two stages only share a file format. Here the warm start is
emulated by perturbing the truth, which is what a decent predictor output
looks like.
"""

from pathlib import Path

import numpy as np

import ctiskit as ck
from ctiskit.sysmat import build_h, matvec

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

rng = np.random.default_rng(11)
geom = ck.GeometryParams(x=10, y=10, z=4, b1=2, b2=0, shift=1)
optics = ck.OpticalParams.unit(4, sigma_psf=0.9)
h = build_h(geom, optics)

truth = ck.HyperCube(rng.uniform(0.0, 1.0, geom.cube_shape))
image = ck.CtisImage(matvec(h, truth.ravel()).reshape(h.side, h.side))

# Emulated predictor output: truth with 15% multiplicative error, via file.
predicted = ck.HyperCube(
    np.clip(truth.data * rng.normal(1.0, 0.15, truth.data.shape), 0, None))
ck.write_cube(predicted, out_dir / "predicted.hcub")
print(f"warm-start MSE before any iteration: {ck.mse(predicted, truth):.4e}")

budgets = (10,)
for iters in budgets:
    cold = ck.em_reconstruct(
        h, image, ck.EmConfig(iterations=iters, init="ones"), truth=truth)
    warm = ck.em_reconstruct(
        h, image, ck.EmConfig(iterations=iters,
                              init=out_dir / "predicted.hcub"), truth=truth)
    m_cold = ck.mse(cold.cube, truth)
    m_warm = ck.mse(warm.cube, truth)
    print(f"{iters} iterations: ones init MSE {m_cold:.4e}, "
          f"file init MSE {m_warm:.4e} "
          f"({(1 - m_warm / m_cold):+.0%} change)")

print("the warm start reaches a lower error with the same budget, which is")
print("the whole point of handing the solver a learned initial condition")
