"""Command-line front end.

Exit codes: 0 success, 1 domain error (bad data, dimension mismatch,
unreadable file), 2 usage error. Every file output is written to a
temporary sibling first and renamed into place.
"""

from __future__ import annotations

import argparse
import glob
import os
import struct
import sys
import tempfile
import zlib
from pathlib import Path

import numpy as np

from . import calib, em, metrics, pipeline, sysmat
from .core import (
    GeometryParams,
    OpticalParams,
    read_cube,
    read_image,
    read_spectrum,
    write_cube,
    write_image,
)
from .simulator import simulate

DEFAULT_WL_MIN = 400.0
DEFAULT_WL_MAX = 750.0
RGB_TARGETS_NM = (650.0, 549.0, 470.0)  # red, green, blue


def _atomic_write(path, writer) -> None:
    """Write via a temp file in the destination directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "wb") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _atomic_write_text(path, writer) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            writer(fh)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _add_geometry_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--x", type=int, default=100)
    parser.add_argument("--y", type=int, default=None,
                        help="defaults to --x (square zeroth order)")
    parser.add_argument("--z", type=int, default=25)
    parser.add_argument("--b1", type=int, default=27)
    parser.add_argument("--b2", type=int, default=0)
    parser.add_argument("--shift", type=int, default=2)
    parser.add_argument("--all-orders", type=_parse_bool, default=True,
                        metavar="BOOL")


def _add_optics_flags(parser: argparse.ArgumentParser,
                      noise: bool = True) -> None:
    parser.add_argument("--sigma-psf", type=float, default=1.04)
    if noise:
        parser.add_argument("--noise", type=float, default=0.44)
        parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--sens", type=str, default=None,
                        help="sensitivity table CSV (orders as columns)")
    parser.add_argument("--illum", type=str, default=None,
                        help="illuminant spectrum CSV")
    parser.add_argument("--wl-min", type=float, default=DEFAULT_WL_MIN)
    parser.add_argument("--wl-max", type=float, default=DEFAULT_WL_MAX)


def _parse_bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("true", "1", "yes"):
        return True
    if lowered in ("false", "0", "no"):
        return False
    raise argparse.ArgumentTypeError(f"expected true/false, got {text!r}")


def _geometry(args) -> GeometryParams:
    y = args.y if args.y is not None else args.x
    return GeometryParams(args.x, y, args.z, args.b1, args.b2, args.shift,
                          args.all_orders)


def channel_wavelengths(z: int, wl_min: float, wl_max: float) -> np.ndarray:
    """Channel-center wavelengths, linearly spaced across the band."""
    if z == 1:
        return np.array([(wl_min + wl_max) / 2.0])
    return np.linspace(wl_min, wl_max, z)


def _optics(args, geom: GeometryParams, noise: bool = True) -> OpticalParams:
    targets = channel_wavelengths(geom.z, args.wl_min, args.wl_max)
    if args.sens is not None:
        table = calib.read_sensitivity_table(args.sens)
        if table.n_orders != geom.n_orders:
            raise ValueError(
                f"sensitivity table has {table.n_orders} orders, geometry "
                f"needs {geom.n_orders}"
            )
        diff_sens = calib.interpolate_sensitivity(table, targets)
    else:
        diff_sens = np.ones((geom.n_orders, geom.z))
    if args.illum is not None:
        curve = read_spectrum(args.illum)
        illum = np.interp(targets, curve.wavelengths, curve.values)
    else:
        illum = np.ones(geom.z)
    noise_sigma = args.noise if noise else 0.0
    return OpticalParams(diff_sens, illum, args.sigma_psf, noise_sigma)


def _build_or_load_h(geom, optics, cache_path, nnz_cap):
    if cache_path:
        key = sysmat.cache_key(geom, optics)
        if os.path.exists(cache_path):
            try:
                return sysmat.load_h(cache_path, expected_key=key)
            except ValueError:
                print(f"cache {cache_path} does not match flags; rebuilding",
                      file=sys.stderr)
        h = sysmat.build_h(geom, optics, nnz_cap=nnz_cap)
        sysmat.save_h(h, cache_path, key=key)
        return h
    return sysmat.build_h(geom, optics, nnz_cap=nnz_cap)


# ---------------------------------------------------------------------------
# Subcommands
# ---------------------------------------------------------------------------

def cmd_simulate(args) -> int:
    geom = _geometry(args)
    optics = _optics(args, geom)
    cube = read_cube(args.cube)
    image = simulate(cube, geom, optics, seed=args.seed)
    _atomic_write(args.out, lambda fh: write_image(image, fh))
    print(f"wrote {args.out} ({image.side}x{image.side})")
    return 0


def cmd_reconstruct(args) -> int:
    geom = _geometry(args)
    optics = _optics(args, geom, noise=False)
    image = read_image(args.image)
    h = _build_or_load_h(geom, optics, args.h_cache, args.nnz_cap)

    init = args.init
    if init not in ("ones", "backproject", "backprojection"):
        init = Path(init)
        if not init.exists():
            raise ValueError(f"init cube file not found: {init}")
    elif init == "backproject":
        init = "backprojection"

    truth = read_cube(args.truth) if args.truth else None
    config = em.EmConfig(iterations=args.iters, init=init,
                         epsilon=args.epsilon,
                         record_trace=bool(args.trace or truth is not None))
    result = em.em_reconstruct(h, image, config, truth=truth)
    _atomic_write(args.out, lambda fh: write_cube(result.cube, fh))
    if args.trace:
        _atomic_write_text(args.trace,
                           lambda fh: em.write_trace(result.trace, fh))
    print(f"wrote {args.out} after {args.iters} iterations")
    return 0


def cmd_calibrate_psf(args) -> int:
    image = read_image(args.image)
    roi = tuple(int(v) for v in args.roi.split(","))
    if len(roi) != 4:
        raise ValueError("--roi must be row0,col0,height,width")
    fit = calib.estimate_psf(image, roi)
    print(f"amplitude={fit.amplitude:g} mean={fit.mean:g} "
          f"sigma={fit.sigma:g} r_squared={fit.r_squared:g}")
    return 0


def cmd_fit_blackbody(args) -> int:
    spectrum = read_spectrum(args.spectrum)
    temp, amp = calib.fit_blackbody(spectrum,
                                    bracket=(args.t_min, args.t_max))
    model = amp * calib.planck_radiance(spectrum.wavelengths, temp)
    ss_res = float(((spectrum.values - model) ** 2).sum())
    ss_tot = float(((spectrum.values - spectrum.values.mean()) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    print(f"temperature_k={temp:.1f} amplitude={amp:g} "
          f"r_squared={r_squared:g}")
    return 0


def cmd_sensitivity(args) -> int:
    counts_table = calib.read_sensitivity_table(args.counts)
    exposures = read_spectrum(args.exposure)
    gains = read_spectrum(args.gain)
    corrections = read_spectrum(args.correction)
    wl = counts_table.wavelengths
    for name, curve in (("exposure", exposures), ("gain", gains),
                        ("correction", corrections)):
        if curve.wavelengths.shape != wl.shape \
                or not np.allclose(curve.wavelengths, wl):
            raise ValueError(f"{name} grid does not match the counts grid")
    table = calib.diffraction_sensitivity(
        wl, counts_table.values, exposures.values, gains.values,
        corrections.values)
    if args.channels:
        targets = channel_wavelengths(args.channels, args.wl_min, args.wl_max)
        values = calib.interpolate_sensitivity(table, targets)
        table = calib.SensitivityTable(targets, values)
    _atomic_write_text(args.out,
                       lambda fh: calib.write_sensitivity_table(table, fh))
    print(f"wrote {args.out} ({table.n_orders} orders x "
          f"{table.wavelengths.size} wavelengths)")
    return 0


def cmd_dataset(args) -> int:
    sources = sorted(p for pattern in args.sources
                     for p in glob.glob(pattern)) or list(args.sources)
    geom = _geometry(args)
    optics = _optics(args, geom)
    config = pipeline.DatasetConfig(
        out_dir=args.out_dir,
        crops_per_source=args.crops,
        crop_size=args.size,
        bin_to=args.channels_from_216,
        seed=args.seed,
        noise_seed=args.noise_seed,
        unseen_sources=tuple(args.unseen),
    )
    manifest, errors = pipeline.generate_dataset(sources, geom, optics, config)
    manifest_path = Path(args.out_dir) / "manifest.csv"
    _atomic_write_text(manifest_path,
                       lambda fh: pipeline.write_manifest(manifest, fh))
    for err in errors:
        print(f"skipped: {err}", file=sys.stderr)
    counts = manifest.counts()
    print(f"wrote {manifest_path} with {len(manifest)} samples "
          f"(train={counts['train']} val={counts['val']} "
          f"test={counts['test']} unseen={counts['unseen']})")
    return 0 if not errors else 1


def cmd_tiles(args) -> int:
    image = read_image(args.image)
    geom = _geometry(args) if args.check_geometry else None
    tiles = pipeline.split_tiles(image, geom)
    stem = Path(args.image).with_suffix("")
    for idx, tile in enumerate(tiles):
        path = Path(f"{stem}_tile{idx}.himg")
        _atomic_write(path, lambda fh, t=tile: write_image(t, fh))
    print(f"wrote 9 tiles of {tiles[0].side}x{tiles[0].side} next to "
          f"{args.image}")
    return 0


def cmd_metrics(args) -> int:
    a = read_cube(args.a)
    b = read_cube(args.b)
    value = metrics.mse(a, b)
    print(f"mse={value:g} psnr={metrics.psnr(value):g}")
    return 0


def cmd_render(args) -> int:
    cube = read_cube(args.cube)
    if args.channels:
        chans = [int(v) for v in args.channels.split(",")]
        if len(chans) != 3:
            raise ValueError("--channels needs exactly 3 comma-separated "
                             "indices (r,g,b)")
    else:
        grid = channel_wavelengths(cube.channels, args.wl_min, args.wl_max)
        chans = [int(np.abs(grid - t).argmin()) for t in RGB_TARGETS_NM]
    for c in chans:
        if not 0 <= c < cube.channels:
            raise ValueError(f"channel {c} out of range")
    print(f"render channels (r,g,b): {chans[0]},{chans[1]},{chans[2]}",
          file=sys.stderr)
    rgb = np.stack([cube.data[:, :, c] for c in chans], axis=2)
    scaled = np.clip(rgb * args.gain, 0.0, 255.0).astype(np.uint8)
    _atomic_write(args.out, lambda fh: write_png(scaled, fh))
    print(f"wrote {args.out}")
    return 0


def cmd_export_h(args) -> int:
    geom = _geometry(args)
    optics = _optics(args, geom, noise=False)
    h = sysmat.build_h(geom, optics, nnz_cap=args.nnz_cap)
    _atomic_write_text(args.out, lambda fh: sysmat.export_matrix_market(h, fh))
    print(f"wrote {args.out} ({h.rows}x{h.cols}, nnz={h.nnz})")
    return 0


def write_png(rgb: np.ndarray, fh) -> None:
    """Minimal 8-bit RGB PNG encoder (no external imaging dependency)."""
    if rgb.ndim != 3 or rgb.shape[2] != 3 or rgb.dtype != np.uint8:
        raise ValueError("expected an (h, w, 3) uint8 array")
    height, width = rgb.shape[:2]

    def chunk(tag: bytes, payload: bytes) -> bytes:
        body = tag + payload
        return struct.pack(">I", len(payload)) + body \
            + struct.pack(">I", zlib.crc32(body))

    raw = b"".join(b"\x00" + rgb[row].tobytes() for row in range(height))
    fh.write(b"\x89PNG\r\n\x1a\n")
    fh.write(chunk(b"IHDR", struct.pack(">IIBBBBB", width, height, 8, 2,
                                        0, 0, 0)))
    fh.write(chunk(b"IDAT", zlib.compress(raw, 9)))
    fh.write(chunk(b"IEND", b""))


# ---------------------------------------------------------------------------
# Parser wiring
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctiskit",
        description="Simulate, calibrate and reconstruct snapshot "
                    "spectral images.",
    )
    parser.add_argument("--threads", type=int, default=None,
                        help="cap internal linear-algebra threads")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="cube file -> sensor image file")
    p.add_argument("--cube", required=True)
    p.add_argument("--out", required=True)
    _add_geometry_flags(p)
    _add_optics_flags(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("reconstruct", help="sensor image file -> cube file")
    p.add_argument("--image", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--iters", type=int, default=20)
    p.add_argument("--init", default="ones",
                   help="ones | backproject | path to an HCUB initializer")
    p.add_argument("--truth", default=None)
    p.add_argument("--trace", default=None, help="per-iteration CSV path")
    p.add_argument("--epsilon", type=float, default=1e-12)
    p.add_argument("--h-cache", default=None)
    p.add_argument("--nnz-cap", type=int, default=sysmat.DEFAULT_NNZ_CAP)
    _add_geometry_flags(p)
    _add_optics_flags(p, noise=False)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("calibrate-psf", help="fit the PSF width from an edge")
    p.add_argument("--image", required=True)
    p.add_argument("--roi", required=True, help="row0,col0,height,width")
    p.set_defaults(func=cmd_calibrate_psf)

    p = sub.add_parser("fit-blackbody",
                       help="fit a Planck curve to a spectrum CSV")
    p.add_argument("--spectrum", required=True)
    p.add_argument("--t-min", type=float, default=1000.0)
    p.add_argument("--t-max", type=float, default=10000.0)
    p.set_defaults(func=cmd_fit_blackbody)

    p = sub.add_parser("sensitivity",
                       help="photon counts + exposure/gain/correction -> "
                            "sensitivity table")
    p.add_argument("--counts", required=True,
                   help="CSV of per-order spot counts (orders as columns)")
    p.add_argument("--exposure", required=True)
    p.add_argument("--gain", required=True)
    p.add_argument("--correction", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channels", type=int, default=None,
                   help="also interpolate to this many channels")
    p.add_argument("--wl-min", type=float, default=DEFAULT_WL_MIN)
    p.add_argument("--wl-max", type=float, default=DEFAULT_WL_MAX)
    p.set_defaults(func=cmd_sensitivity)

    p = sub.add_parser("dataset", help="batch bin/crop/simulate with manifest")
    p.add_argument("--sources", nargs="+", required=True,
                   help="cube files or glob patterns")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--crops", type=int, default=768)
    p.add_argument("--size", type=int, default=100)
    p.add_argument("--channels-from-216", type=int, default=None,
                   help="bin 216-channel sources to 25 or 100")
    p.add_argument("--noise-seed", type=int, default=0)
    p.add_argument("--unseen", nargs="*", default=[],
                   help="source ids excluded from train/val/test")
    _add_geometry_flags(p)
    _add_optics_flags(p)
    p.set_defaults(func=cmd_dataset)

    p = sub.add_parser("tiles", help="split an image into its 3x3 tiles")
    p.add_argument("--image", required=True)
    p.add_argument("--check-geometry", action="store_true",
                   help="verify the image side against the geometry flags")
    _add_geometry_flags(p)
    p.set_defaults(func=cmd_tiles)

    p = sub.add_parser("metrics", help="MSE and PSNR between two cube files")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("render", help="compose an RGB PNG from 3 channels")
    p.add_argument("--cube", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--channels", default=None, help="r,g,b channel indices")
    p.add_argument("--gain", type=float, default=1.0)
    p.add_argument("--wl-min", type=float, default=DEFAULT_WL_MIN)
    p.add_argument("--wl-max", type=float, default=DEFAULT_WL_MAX)
    p.set_defaults(func=cmd_render)

    p = sub.add_parser("export-h",
                       help="write the system matrix in Matrix Market form")
    p.add_argument("--out", required=True)
    p.add_argument("--nnz-cap", type=int, default=sysmat.DEFAULT_NNZ_CAP)
    _add_geometry_flags(p)
    _add_optics_flags(p, noise=False)
    p.set_defaults(func=cmd_export_h)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    limiter = None
    if args.threads is not None:
        try:
            from threadpoolctl import threadpool_limits
            limiter = threadpool_limits(limits=args.threads)
        except ImportError:
            print("threadpoolctl not installed; --threads ignored",
                  file=sys.stderr)
    try:
        return args.func(args)
    except (ValueError, OSError, MemoryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    finally:
        if limiter is not None:
            limiter.unregister()


if __name__ == "__main__":
    sys.exit(main())
