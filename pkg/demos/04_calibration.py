"""The three calibration procedures on synthetic measurements.

1. Slanted-edge PSF width: edge image -> ESF -> LSF -> Gaussian fit.
2. Diffraction sensitivity: dark-subtracted spot counts normalized by
   exposure, gain and the illuminant correction, then interpolated to the
   channel grid.
3. Blackbody illuminant: Planck-curve temperature fit.
"""

from pathlib import Path

import numpy as np

import ctiskit as ck
from ctiskit.calib import planck_radiance, write_sensitivity_table

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)
rng = np.random.default_rng(5)

# --- 1. PSF from a blurred edge -------------------------------------------
side = 120
edge = np.full((side, side), 12.0)
for r in range(side):
    edge[r, 60 + (1 if r >= 100 else 0):] = 230.0  # gently slanted edge
observed = ck.convolve_psf(ck.CtisImage(edge), 1.04)
fit = ck.estimate_psf(observed, (10, 40, 100, 40))
print(f"PSF fit: sigma = {fit.sigma:.3f} px, R^2 = {fit.r_squared:.4f} "
      "(forward blur was 1.04)")

# --- 2. Diffraction sensitivity -------------------------------------------
wavelengths = np.arange(400.0, 751.0, 25.0)  # 15-point measurement grid
n_wl = wavelengths.size

# Synthetic monochromator session: parabolic first-order efficiency, a dim
# zeroth order, weaker right-diagonal orders.
efficiency = 1.0 - ((wavelengths - 575.0) / 250.0) ** 2
counts = np.empty((9, n_wl))
for s in range(9):
    scale = 0.25 if s == 4 else (0.6 if s in (2, 8) else 1.0)
    counts[s] = 4000.0 * scale * efficiency * rng.uniform(0.95, 1.05, n_wl)
exposures = rng.uniform(2.0, 8.0, n_wl) * 1e3  # microseconds
gains = np.ones(n_wl)
corrections = efficiency * 0.8 + 0.2

table = ck.diffraction_sensitivity(wavelengths, counts * exposures * gains,
                                   exposures, gains, corrections)
per_channel = ck.interpolate_sensitivity(table, np.linspace(400, 750, 25))
print(f"sensitivity table: {table.values.shape} -> interpolated "
      f"{per_channel.shape} for 25 channels")
write_sensitivity_table(table, out_dir / "sensitivity.csv")

# Count a synthetic spot the way the table values are measured:
spot = np.zeros((64, 64))
spot[32, 32] = 900.0
frame = ck.convolve_psf(ck.CtisImage(spot), 2.0)
dark = ck.CtisImage(np.full((64, 64), 0.05))
pc = ck.spot_photon_count(frame, dark, (20, 20, 25, 25))
print(f"spot photon count over a +-4 sigma box: {pc:.1f} (injected 900)")

# --- 3. Blackbody illuminant ----------------------------------------------
wl = np.arange(200.0, 721.0, 2.0)
measured = planck_radiance(wl, 2952.0)
measured = measured / measured.max() * rng.uniform(0.99, 1.01, wl.size)
curve = ck.SpectralCurve(wl, np.clip(measured, 0, None))
ck.write_spectrum(curve, out_dir / "halogen.csv")
temperature, amplitude = ck.fit_blackbody(curve)
print(f"blackbody fit: T = {temperature:.0f} K (synthetic lamp was 2952 K)")
print(f"outputs in {out_dir}")
