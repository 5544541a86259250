"""Dataset preparation: spectral binning, cropping, tiling, partitioning
and batched forward simulation with a CSV manifest.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .core import (
    CtisImage,
    GeometryParams,
    HyperCube,
    OpticalParams,
    read_cube,
    write_cube,
    write_image,
)
from .simulator import image_side, simulate

RAW_CHANNELS = 216
TRIM_FRONT = 10  # low signal-to-noise channels dropped at the front
TRIM_BACK = 6  # and at the back, leaving 200 to average down
MANIFEST_FIELDS = ("id", "source", "row", "col", "split", "cube_path",
                   "image_path")
SPLITS = ("train", "val", "test", "unseen")


@dataclass(frozen=True)
class ManifestEntry:
    id: str
    source: str
    row: int
    col: int
    split: str
    cube_path: str
    image_path: str

    def __post_init__(self):
        if self.split not in SPLITS and self.split != "":
            raise ValueError(f"unknown split {self.split!r}")


@dataclass(frozen=True)
class DatasetManifest:
    entries: tuple[ManifestEntry, ...]

    def __post_init__(self):
        ids = [e.id for e in self.entries]
        if len(set(ids)) != len(ids):
            raise ValueError("manifest sample ids must be unique")
        object.__setattr__(self, "entries", tuple(self.entries))

    def __len__(self) -> int:
        return len(self.entries)

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in SPLITS}
        for e in self.entries:
            if e.split:
                out[e.split] += 1
        return out


def spectral_bin(cube: HyperCube, target: int) -> HyperCube:
    """Reduce the 216 raw channels to 25 or 100.

    Drops the first 10 and last 6 channels, then averages disjoint blocks
    of the remaining 200: blocks of 8 for 25 channels, blocks of 2 for 100.
    """
    if cube.channels != RAW_CHANNELS:
        raise ValueError(
            f"spectral_bin expects {RAW_CHANNELS} channels, got {cube.channels}"
        )
    if target not in (25, 100):
        raise ValueError(f"target must be 25 or 100, got {target}")
    kept = cube.data[:, :, TRIM_FRONT:RAW_CHANNELS - TRIM_BACK]
    block = kept.shape[2] // target
    binned = kept.reshape(cube.height, cube.width, target, block).mean(axis=3)
    return HyperCube(binned)


def crop_samples(cube: HyperCube, count: int, size: int,
                 seed: int = 0) -> list[tuple[int, int, HyperCube]]:
    """Draw `count` size-by-size crops at seeded uniform positions.

    Returns (row, col, crop) triples; duplicates are allowed, which keeps
    the sample count independent of the source size.
    """
    if count < 1 or size < 1:
        raise ValueError("count and size must be >= 1")
    if cube.height < size or cube.width < size:
        raise ValueError(
            f"source {cube.height}x{cube.width} smaller than crop size {size}"
        )
    rng = np.random.default_rng(seed)
    rows = rng.integers(0, cube.height - size + 1, count)
    cols = rng.integers(0, cube.width - size + 1, count)
    return [
        (int(r), int(c), HyperCube(cube.data[r:r + size, c:c + size, :]))
        for r, c in zip(rows, cols)
    ]


def split_tiles(image: CtisImage,
                geom: GeometryParams | None = None) -> list[CtisImage]:
    """Partition into a row-major 3x3 grid; tile 4 holds the zeroth order."""
    if image.side % 3 != 0:
        raise ValueError(f"image side {image.side} is not divisible by 3")
    if geom is not None and image.side != image_side(geom):
        raise ValueError(
            f"image side {image.side} does not match geometry side "
            f"{image_side(geom)}"
        )
    t = image.side // 3
    return [
        CtisImage(image.data[i * t:(i + 1) * t, j * t:(j + 1) * t])
        for i in range(3) for j in range(3)
    ]


def assemble_tiles(tiles: list[CtisImage]) -> CtisImage:
    """Inverse of split_tiles."""
    if len(tiles) != 9:
        raise ValueError("expected exactly 9 tiles")
    t = tiles[0].side
    out = np.empty((3 * t, 3 * t))
    for idx, tile in enumerate(tiles):
        if tile.side != t:
            raise ValueError("tiles must all share one size")
        i, j = divmod(idx, 3)
        out[i * t:(i + 1) * t, j * t:(j + 1) * t] = tile.data
    return CtisImage(out)


def _split_counts(n: int, fractions) -> list[int]:
    # largest-remainder apportionment keeps the counts exact
    fractions = [float(f) for f in fractions]
    if abs(sum(fractions) - 1.0) > 1e-9:
        raise ValueError(f"fractions must sum to 1, got {sum(fractions)}")
    raw = [f * n for f in fractions]
    counts = [int(np.floor(v)) for v in raw]
    remainder = n - sum(counts)
    order = sorted(range(len(raw)), key=lambda i: raw[i] - counts[i],
                   reverse=True)
    for i in order[:remainder]:
        counts[i] += 1
    return counts


def partition(entries, fractions, seed: int = 0) -> DatasetManifest:
    """Assign train/val/test splits by seeded shuffle.

    Entries already labeled `unseen` keep that label and never enter the
    shuffle. The three counts follow the fractions exactly (largest
    remainder), so e.g. 131,328 samples at the published fractions land on
    91,998 / 19,665 / 19,665.
    """
    entries = list(entries)
    if not entries:
        raise ValueError("cannot partition an empty entry list")
    seen_idx = [i for i, e in enumerate(entries) if e.split != "unseen"]
    counts = _split_counts(len(seen_idx), fractions)
    rng = np.random.default_rng(seed)
    shuffled = [seen_idx[i] for i in rng.permutation(len(seen_idx))]

    assignment: dict[int, str] = {}
    cursor = 0
    for split, count in zip(("train", "val", "test"), counts):
        for i in shuffled[cursor:cursor + count]:
            assignment[i] = split
        cursor += count

    out = [
        e if e.split == "unseen" else replace(e, split=assignment[i])
        for i, e in enumerate(entries)
    ]
    return DatasetManifest(tuple(out))


@dataclass(frozen=True)
class DatasetConfig:
    """Batch-generation knobs for generate_dataset."""

    out_dir: str
    crops_per_source: int = 768
    crop_size: int = 100
    bin_to: int | None = None  # 25 or 100; None keeps source channels
    fractions: tuple[float, float, float] = (
        91998 / 131328, 19665 / 131328, 19665 / 131328)
    seed: int = 0
    noise_seed: int = 0
    unseen_sources: tuple[str, ...] = ()


def generate_dataset(sources, geom: GeometryParams, optics: OpticalParams,
                     config: DatasetConfig) -> tuple[DatasetManifest, list[str]]:
    """Bin, crop and simulate every source cube; write HCUB/HIMG pairs.

    Returns the partitioned manifest and a list of per-file error strings
    (bad sources are skipped, not fatal). Reruns with identical seeds
    reproduce the same bytes.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    unseen = set(config.unseen_sources)

    entries: list[ManifestEntry] = []
    errors: list[str] = []
    for src_index, source in enumerate(sorted(str(s) for s in sources)):
        try:
            cube = read_cube(source)
            if config.bin_to is not None:
                cube = spectral_bin(cube, config.bin_to)
            src_id = Path(source).stem
            crop_seed = np.random.SeedSequence(
                [config.seed, src_index]).generate_state(1)[0]
            crops = crop_samples(cube, config.crops_per_source,
                                 config.crop_size, int(crop_seed))
        except (ValueError, OSError) as exc:
            errors.append(f"{source}: {exc}")
            continue
        for k, (row, col, crop) in enumerate(crops):
            sample_id = f"{src_id}-{k:04d}"
            cube_path = out_dir / f"{sample_id}.hcub"
            image_path = out_dir / f"{sample_id}.himg"
            try:
                noise_seed = np.random.SeedSequence(
                    [config.noise_seed, src_index, k]).generate_state(1)[0]
                image = simulate(crop, geom, optics, seed=int(noise_seed))
                write_cube(crop, cube_path)
                write_image(image, image_path)
            except (ValueError, OSError) as exc:
                errors.append(f"{sample_id}: {exc}")
                continue
            entries.append(ManifestEntry(
                id=sample_id,
                source=src_id,
                row=row,
                col=col,
                split="unseen" if src_id in unseen else "",
                cube_path=str(cube_path),
                image_path=str(image_path),
            ))

    entries.sort(key=lambda e: e.id)
    manifest = partition(entries, config.fractions, seed=config.seed)
    return manifest, errors


def write_manifest(manifest: DatasetManifest, destination) -> None:
    if hasattr(destination, "write"):
        _write_manifest_rows(manifest, destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write_manifest_rows(manifest, fh)


def _write_manifest_rows(manifest: DatasetManifest, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(MANIFEST_FIELDS)
    for e in manifest.entries:
        writer.writerow([e.id, e.source, e.row, e.col, e.split,
                         e.cube_path, e.image_path])


def read_manifest(source) -> DatasetManifest:
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows or tuple(rows[0]) != MANIFEST_FIELDS:
        raise ValueError("manifest CSV header mismatch")
    entries = [
        ManifestEntry(r[0], r[1], int(r[2]), int(r[3]), r[4], r[5], r[6])
        for r in rows[1:]
    ]
    return DatasetManifest(tuple(entries))
