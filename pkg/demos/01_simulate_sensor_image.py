"""Simulate a sensor image from a hyperspectral cube.

Walks the forward model end to end: a 100x100x25 cube is projected into a
zeroth order plus eight dispersed first orders, blurred by the measured
PSF width, and perturbed by clamped Gaussian noise. The result is the
450x450 frame geometry, split into the nine 150x150 tiles a network would
consume.
"""

from pathlib import Path

import numpy as np

import ctiskit as ck

out_dir = Path(__file__).parent / "out"
out_dir.mkdir(exist_ok=True)

# A toy scene: three bright rectangles with different spectra.
rng = np.random.default_rng(0)
cube = np.zeros((100, 100, 25))
cube[10:40, 10:40, :] = np.linspace(1.0, 0.2, 25)      # red-ish: falls with channel
cube[55:85, 20:60, :] = np.linspace(0.2, 1.0, 25)      # blue-ish: rises
cube[30:70, 65:95, :] = np.exp(-((np.arange(25) - 12) / 4.0) ** 2)  # band-pass
scene = ck.HyperCube(cube * 200.0)

geom = ck.GeometryParams(x=100, y=100, z=25, b1=27, b2=0, shift=2)
print(f"canvas side for this geometry: {ck.image_side(geom)} pixels")

# Flat optics keep the demo self-contained; measured sensitivity tables
# drop in via OpticalParams(diff_sens=..., illum=...).
optics = ck.OpticalParams.unit(25, sigma_psf=1.04, noise_sigma=0.44)

image = ck.simulate(scene, geom, optics, seed=7)
print(f"simulated frame: {image.side}x{image.side}, "
      f"total intensity {image.data.sum():.3e}")

ck.write_cube(scene, out_dir / "scene.hcub")
ck.write_image(image, out_dir / "frame450.himg")

# Where each diffraction order lands:
for order in ck.order_vectors(geom.all_orders):
    r0, c0 = ck.spot_origin(geom, order, 0)
    tag = "zeroth" if order == (0, 0) else f"({order.di:+d},{order.dj:+d})"
    print(f"  order {tag:>7}: channel-0 sub-image starts at ({r0}, {c0})")

# The 3x3 tiling used as network input:
tiles = ck.split_tiles(image, geom)
print(f"split into {len(tiles)} tiles of {tiles[0].side}x{tiles[0].side}")
for idx, tile in enumerate(tiles):
    ck.write_image(tile, out_dir / f"frame450_tile{idx}.himg")
print(f"outputs in {out_dir}")
