"""Noise makes the EM iteration converge, then diverge.

With a noiseless image the error against the truth falls monotonically.
Add clamped Gaussian noise and the error dips to a minimum at some
iteration k* and climbs afterwards: the model can no longer explain the
data exactly, and later iterations fit noise. Fixed iteration budgets plus
the recorded trace are how a caller picks k* offline.
"""

import numpy as np

import ctiskit as ck
from ctiskit.sysmat import build_h, matvec

rng = np.random.default_rng(104)
geom = ck.GeometryParams(x=6, y=6, z=3, b1=2, b2=0, shift=1)
optics = ck.OpticalParams(rng.uniform(0.3, 1.2, (9, 3)),
                          rng.uniform(0.3, 1.2, 3), sigma_psf=1.5)
h = build_h(geom, optics)

truth_vec = rng.uniform(0.0, 3.0, h.cols)
truth = ck.HyperCube(truth_vec.reshape(geom.cube_shape))
clean = ck.CtisImage(matvec(h, truth_vec).reshape(h.side, h.side))
noisy = ck.add_noise(clean, noise_sigma=0.5, seed=4)

for label, image in (("noiseless", clean), ("noisy", noisy)):
    result = ck.em_reconstruct(
        h, image, ck.EmConfig(iterations=30, init="ones", record_trace=True),
        truth=truth)
    errs = np.array([rec.mse_vs_truth for rec in result.trace])
    k_star = int(errs.argmin())
    bar_scale = 40 / errs[1:].max()
    print(f"\n{label} image, error vs truth per iteration "
          f"(minimum at k = {k_star}):")
    for k in range(0, 31, 2):
        bar = "#" * max(1, int(errs[k] * bar_scale)) if k else ""
        print(f"  k={k:2d}  {errs[k]:.4e}  {bar if k else '(init)'}")
