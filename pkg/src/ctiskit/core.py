"""Domain types and binary file formats shared by every other module.

All container types are immutable after construction; their numpy buffers
are marked read-only so instances can be shared freely across threads.
"""

from __future__ import annotations

import csv
import io
import struct
from dataclasses import dataclass, field

import numpy as np

HCUB_MAGIC = b"HCUB"
HIMG_MAGIC = b"HIMG"
FORMAT_VERSION = 1

_F32_MAX = np.finfo(np.float32).max


class FormatError(ValueError):
    """Raised when a binary cube/image file violates its format contract."""


def _as_readonly(arr, dtype=np.float64):
    out = np.ascontiguousarray(arr, dtype=dtype)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class HyperCube:
    """A hyperspectral cube: two spatial axes by one spectral axis.

    data is indexed [row, col, channel] and holds non-negative intensities.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.data)
        if arr.ndim != 3:
            raise ValueError(f"cube data must be 3-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("cube must have at least one voxel per axis")
        if not np.isfinite(arr).all():
            raise ValueError("cube contains non-finite values")
        if (arr < 0).any():
            raise ValueError("cube contains negative values")
        object.__setattr__(self, "data", arr)

    @property
    def height(self) -> int:
        return self.data.shape[0]

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def channels(self) -> int:
        return self.data.shape[2]

    def ravel(self) -> np.ndarray:
        """Flatten to the canonical voxel vector (channel fastest)."""
        return self.data.reshape(-1)


@dataclass(frozen=True)
class CtisImage:
    """A square sensor image: zeroth order plus surrounding first orders."""

    data: np.ndarray

    def __post_init__(self):
        arr = _as_readonly(self.data)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError(f"image data must be square 2-D, got shape {arr.shape}")
        if arr.size == 0:
            raise ValueError("image must have at least one pixel")
        if not np.isfinite(arr).all():
            raise ValueError("image contains non-finite values")
        if (arr < 0).any():
            raise ValueError("image contains negative values")
        object.__setattr__(self, "data", arr)

    @property
    def side(self) -> int:
        return self.data.shape[0]

    def ravel(self) -> np.ndarray:
        return self.data.reshape(-1)


@dataclass(frozen=True)
class GeometryParams:
    """Geometric simulator inputs.

    x, y     zeroth-order size in pixels (square; x == y)
    z        number of spectral channels
    b1       gap between the zeroth order and the first orders
    b2       gap between the first orders and the image border
    shift    pixel shift between consecutive channels in the first orders
    all_orders  True simulates all 8 first orders, False skips the 4 diagonals
    """

    x: int
    y: int
    z: int
    b1: int
    b2: int
    shift: int
    all_orders: bool = True

    def __post_init__(self):
        if self.x != self.y:
            raise ValueError(f"zeroth order must be square, got x={self.x} y={self.y}")
        if self.x < 1 or self.z < 1:
            raise ValueError("x, y and z must all be >= 1")
        if self.b1 < 0 or self.b2 < 0:
            raise ValueError("b1 and b2 must be >= 0")
        if self.shift < 1:
            raise ValueError("shift must be >= 1")

    @property
    def n_orders(self) -> int:
        return 9 if self.all_orders else 5

    @property
    def cube_shape(self) -> tuple[int, int, int]:
        return (self.y, self.x, self.z)


@dataclass(frozen=True)
class OpticalParams:
    """Optical simulator inputs: sensitivities, illuminant, PSF width, noise."""

    diff_sens: np.ndarray  # (n_orders, z) per-order, per-channel sensitivity
    illum: np.ndarray  # (z,) illuminant weight per channel
    sigma_psf: float = 0.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        sens = _as_readonly(self.diff_sens)
        illum = _as_readonly(self.illum)
        if sens.ndim != 2 or sens.shape[0] not in (5, 9):
            raise ValueError(
                f"diff_sens must be (5 or 9) x z, got shape {sens.shape}"
            )
        if illum.ndim != 1 or illum.shape[0] != sens.shape[1]:
            raise ValueError("illum length must match diff_sens channel count")
        if not np.isfinite(sens).all() or (sens < 0).any():
            raise ValueError("diff_sens entries must be finite and >= 0")
        if not np.isfinite(illum).all() or (illum < 0).any():
            raise ValueError("illum entries must be finite and >= 0")
        if self.sigma_psf < 0 or self.noise_sigma < 0:
            raise ValueError("sigma_psf and noise_sigma must be >= 0")
        object.__setattr__(self, "diff_sens", sens)
        object.__setattr__(self, "illum", illum)

    @property
    def n_orders(self) -> int:
        return self.diff_sens.shape[0]

    @property
    def channels(self) -> int:
        return self.diff_sens.shape[1]

    @classmethod
    def unit(cls, z: int, all_orders: bool = True, sigma_psf: float = 0.0,
             noise_sigma: float = 0.0) -> "OpticalParams":
        """Flat optics: every order and channel has sensitivity 1."""
        n = 9 if all_orders else 5
        return cls(np.ones((n, z)), np.ones(z), sigma_psf, noise_sigma)


@dataclass(frozen=True)
class SpectralCurve:
    """A sampled function of wavelength (illuminant spectrum, sensitivity row)."""

    wavelengths: np.ndarray  # nm, strictly increasing
    values: np.ndarray  # non-negative

    def __post_init__(self):
        wl = _as_readonly(self.wavelengths)
        vals = _as_readonly(self.values)
        if wl.ndim != 1 or vals.ndim != 1 or wl.shape != vals.shape:
            raise ValueError("wavelengths and values must be 1-D of equal length")
        if wl.size < 2:
            raise ValueError("a spectral curve needs at least 2 samples")
        if not (np.diff(wl) > 0).all():
            raise ValueError("wavelengths must be strictly increasing")
        if not np.isfinite(vals).all() or (vals < 0).any():
            raise ValueError("curve values must be finite and >= 0")
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", vals)

    def __len__(self) -> int:
        return self.wavelengths.size


# ---------------------------------------------------------------------------
# Binary formats.
#
# HCUB: magic "HCUB", u32 version=1, u32 height, u32 width, u32 channels,
#       then height*width*channels little-endian f32, channel fastest:
#       value(row, col, ch) at flat index ((row*width + col)*channels + ch).
# HIMG: same scheme without the channel axis: magic "HIMG", u32 version=1,
#       u32 height, u32 width (both equal to the side), then side*side f32
#       row-major. Header is 16 bytes.
# ---------------------------------------------------------------------------

def _open_sink(destination):
    if hasattr(destination, "write"):
        return destination, False
    return open(destination, "wb"), True


def _open_source(source):
    if hasattr(source, "read"):
        return source, False
    return open(source, "rb"), True


def _read_exact(stream, n: int, what: str) -> bytes:
    buf = stream.read(n)
    if buf is None or len(buf) != n:
        raise FormatError(f"truncated file: expected {n} bytes of {what}")
    return buf


def _f32_payload(arr: np.ndarray) -> bytes:
    out = arr.astype("<f4")
    if not np.isfinite(out).all():
        raise ValueError("values overflow 32-bit float storage")
    return out.tobytes()


def _read_payload(stream, count: int) -> np.ndarray:
    raw = _read_exact(stream, 4 * count, "payload")
    extra = stream.read(1)
    if extra:
        raise FormatError("payload longer than header-implied length")
    vals = np.frombuffer(raw, dtype="<f4").astype(np.float64)
    if not np.isfinite(vals).all():
        raise FormatError("payload contains non-finite values")
    return vals


def _check_header(stream, magic: bytes) -> None:
    got = _read_exact(stream, 4, "magic")
    if got != magic:
        raise FormatError(f"bad magic: expected {magic!r}, got {got!r}")
    (version,) = struct.unpack("<I", _read_exact(stream, 4, "version"))
    if version != FORMAT_VERSION:
        raise FormatError(f"unsupported version {version}")


def write_cube(cube: HyperCube, destination) -> None:
    """Write an HCUB file (values stored as 32-bit floats)."""
    stream, close = _open_sink(destination)
    try:
        stream.write(HCUB_MAGIC)
        stream.write(struct.pack("<IIII", FORMAT_VERSION, cube.height,
                                 cube.width, cube.channels))
        stream.write(_f32_payload(cube.data))
    finally:
        if close:
            stream.close()


def read_cube(source) -> HyperCube:
    stream, close = _open_source(source)
    try:
        _check_header(stream, HCUB_MAGIC)
        h, w, c = struct.unpack("<III", _read_exact(stream, 12, "dimensions"))
        if h < 1 or w < 1 or c < 1:
            raise FormatError(f"invalid cube dimensions {h}x{w}x{c}")
        vals = _read_payload(stream, h * w * c)
        return HyperCube(vals.reshape(h, w, c))
    finally:
        if close:
            stream.close()


def write_image(image: CtisImage, destination) -> None:
    """Write an HIMG file (values stored as 32-bit floats)."""
    stream, close = _open_sink(destination)
    try:
        stream.write(HIMG_MAGIC)
        stream.write(struct.pack("<III", FORMAT_VERSION, image.side,
                                 image.side))
        stream.write(_f32_payload(image.data))
    finally:
        if close:
            stream.close()


def read_image(source) -> CtisImage:
    stream, close = _open_source(source)
    try:
        _check_header(stream, HIMG_MAGIC)
        height, width = struct.unpack("<II", _read_exact(stream, 8,
                                                         "dimensions"))
        if height < 1 or height != width:
            raise FormatError(f"invalid image dimensions {height}x{width}")
        vals = _read_payload(stream, height * width)
        return CtisImage(vals.reshape(height, width))
    finally:
        if close:
            stream.close()


def cube_to_bytes(cube: HyperCube) -> bytes:
    buf = io.BytesIO()
    write_cube(cube, buf)
    return buf.getvalue()


def image_to_bytes(image: CtisImage) -> bytes:
    buf = io.BytesIO()
    write_image(image, buf)
    return buf.getvalue()


# ---------------------------------------------------------------------------
# Spectra as two-column CSV: "wavelength_nm,value" with a header row.
# ---------------------------------------------------------------------------

def write_spectrum(curve: SpectralCurve, destination) -> None:
    if hasattr(destination, "write"):
        _write_spectrum_rows(curve, destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write_spectrum_rows(curve, fh)


def _write_spectrum_rows(curve: SpectralCurve, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["wavelength_nm", "value"])
    for wl, val in zip(curve.wavelengths, curve.values):
        writer.writerow([repr(float(wl)), repr(float(val))])


def read_spectrum(source) -> SpectralCurve:
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise FormatError("spectrum CSV must have a header and two columns")
    body = rows[1:]
    try:
        wl = np.array([float(r[0]) for r in body])
        vals = np.array([float(r[1]) for r in body])
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed spectrum CSV row: {exc}") from exc
    return SpectralCurve(wl, vals)
