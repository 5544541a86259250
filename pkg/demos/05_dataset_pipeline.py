"""Dataset preparation at toy scale.

The production recipe is: 216-channel source cubes are trimmed and binned
to 25 channels, 768 crops of 100x100 are taken per source, each crop is
simulated into a sensor frame, and the samples are partitioned so that
131,328 of them land on exactly 91,998 / 19,665 / 19,665. This demo runs
the identical code path on miniature cubes.
"""

import tempfile
from pathlib import Path

import numpy as np

import ctiskit as ck

out_dir = Path(tempfile.mkdtemp(prefix="dataset_demo_"))
rng = np.random.default_rng(21)

# Spectral binning: 216 -> 25 drops 10 + 6 noisy channels and averages
# blocks of eight.
raw = ck.HyperCube(rng.uniform(0, 1, (12, 12, 216)))
binned = ck.spectral_bin(raw, 25)
print(f"binned {raw.channels} -> {binned.channels} channels; "
      f"output channel 0 == mean(input 10..17): "
      f"{np.allclose(binned.data[..., 0], raw.data[..., 10:18].mean(axis=2))}")

# Miniature sources and the batched generation run.
src_dir = out_dir / "sources"
src_dir.mkdir()
sources = []
for i in range(6):
    cube = ck.HyperCube(rng.uniform(0, 1, (10, 14, 3)))
    path = src_dir / f"scan{i:02d}.hcub"
    ck.write_cube(cube, path)
    sources.append(str(path))

geom = ck.GeometryParams(x=8, y=8, z=3, b1=2, b2=0, shift=1)
optics = ck.OpticalParams.unit(3, sigma_psf=0.8, noise_sigma=0.02)
config = ck.DatasetConfig(
    out_dir=str(out_dir / "samples"),
    crops_per_source=16,
    crop_size=8,
    fractions=(0.7, 0.15, 0.15),
    unseen_sources=("scan05",),  # held out entirely, like the 7 unseen scans
    seed=1,
    noise_seed=2,
)
manifest, errors = ck.generate_dataset(sources, geom, optics, config)
assert not errors
ck.write_manifest(manifest, out_dir / "manifest.csv")

counts = manifest.counts()
print(f"{len(manifest)} samples: {counts}")
first = manifest.entries[0]
print(f"first row: id={first.id} split={first.split} crop=({first.row},"
      f"{first.col})")
print(f"cube file {Path(first.cube_path).name}: "
      f"{ck.read_cube(first.cube_path).data.shape}")
print(f"image file {Path(first.image_path).name}: side "
      f"{ck.read_image(first.image_path).side}")
print(f"dataset written under {out_dir}")
