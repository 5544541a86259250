"""Direct-projection simulator: cube in, sensor image out.

Generates the sensor image without materializing the system matrix: the
zeroth order integrates over wavelength at a fixed position, each first
order accumulates per-channel slices at dispersion-shifted positions, and
the result is blurred by a Gaussian PSF and perturbed by clamped noise.
"""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np
from scipy.ndimage import convolve1d

from .core import CtisImage, GeometryParams, HyperCube, OpticalParams


class OrderVector(NamedTuple):
    """Row/column direction of a diffraction order; (0, 0) is the zeroth."""

    di: int
    dj: int


# Canonical order listing (row-major over directions). diff_sens rows follow
# this ordering: 9 rows when all_orders, else the 5 non-diagonal entries.
ORDERS_ALL = tuple(
    OrderVector(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1)
)
ORDERS_NO_SKEW = tuple(o for o in ORDERS_ALL if o.di == 0 or o.dj == 0)


def order_vectors(all_orders: bool) -> tuple[OrderVector, ...]:
    return ORDERS_ALL if all_orders else ORDERS_NO_SKEW


def first_order_span(geom: GeometryParams) -> int:
    """Pixel span of one first-order spot along its dispersion axis."""
    return geom.x + geom.shift * (geom.z - 1)


def image_side(geom: GeometryParams) -> int:
    """Side q of the square canvas that exactly contains all spots."""
    return geom.x + 2 * geom.b1 + 2 * geom.b2 + 2 * first_order_span(geom)


def spot_origin(geom: GeometryParams, order: OrderVector,
                channel: int) -> tuple[int, int]:
    """Top-left pixel of one channel's x-by-y sub-image for a given order.

    The zeroth order is centered and channel independent. In the first
    orders channel 0 sits b1 pixels from the zeroth order and channel k is
    displaced a further shift*k pixels outward along each nonzero axis.
    """
    if not 0 <= channel < geom.z:
        raise ValueError(f"channel {channel} out of range for z={geom.z}")
    span = first_order_span(geom)
    zeroth = geom.b2 + span + geom.b1

    def axis_origin(direction: int) -> int:
        if direction == 0:
            return zeroth
        offset = geom.b1 + geom.x + geom.shift * channel
        return zeroth + offset if direction > 0 else zeroth - offset

    return axis_origin(order.di), axis_origin(order.dj)


def _check_inputs(cube: HyperCube, geom: GeometryParams,
                  optics: OpticalParams) -> None:
    if (cube.height, cube.width, cube.channels) != geom.cube_shape:
        raise ValueError(
            f"cube shape {cube.data.shape} does not match geometry "
            f"{geom.cube_shape}"
        )
    if optics.n_orders != geom.n_orders:
        raise ValueError(
            f"diff_sens has {optics.n_orders} rows but geometry implies "
            f"{geom.n_orders} orders"
        )
    if optics.channels != geom.z:
        raise ValueError(
            f"optics cover {optics.channels} channels but geometry has {geom.z}"
        )


def project(cube: HyperCube, geom: GeometryParams,
            optics: OpticalParams) -> CtisImage:
    """Accumulate all diffraction spots onto the canvas (no PSF, no noise)."""
    _check_inputs(cube, geom, optics)
    q = image_side(geom)
    canvas = np.zeros((q, q))
    for s, order in enumerate(order_vectors(geom.all_orders)):
        for k in range(geom.z):
            weight = optics.diff_sens[s, k] * optics.illum[k]
            if weight == 0.0:
                continue
            r0, c0 = spot_origin(geom, order, k)
            canvas[r0:r0 + geom.y, c0:c0 + geom.x] += weight * cube.data[:, :, k]
    return CtisImage(canvas)


def gaussian_kernel(sigma: float) -> np.ndarray:
    """1-D Gaussian taps on [-R, R] with R = ceil(4*sigma), normalized to 1."""
    if sigma < 0:
        raise ValueError("sigma must be >= 0")
    if sigma == 0:
        return np.ones(1)
    radius = math.ceil(4.0 * sigma)
    taps = np.exp(-np.arange(-radius, radius + 1) ** 2 / (2.0 * sigma * sigma))
    return taps / taps.sum()


def convolve_psf(image: CtisImage, sigma_psf: float) -> CtisImage:
    """Blur with a separable normalized Gaussian; zero padding at the border."""
    if sigma_psf == 0:
        return CtisImage(image.data.copy())
    taps = gaussian_kernel(sigma_psf)
    out = convolve1d(image.data, taps, axis=0, mode="constant", cval=0.0)
    out = convolve1d(out, taps, axis=1, mode="constant", cval=0.0)
    return CtisImage(out)


def add_noise(image: CtisImage, noise_sigma: float, seed: int = 0) -> CtisImage:
    """Add zero-mean Gaussian noise, then replace negative pixels by zero."""
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be >= 0")
    if noise_sigma == 0:
        return CtisImage(image.data.copy())
    rng = np.random.default_rng(seed)
    noisy = image.data + rng.normal(0.0, noise_sigma, size=image.data.shape)
    return CtisImage(np.clip(noisy, 0.0, None))


def simulate(cube: HyperCube, geom: GeometryParams, optics: OpticalParams,
             seed: int = 0) -> CtisImage:
    """Full forward model: project, blur with the PSF, add clamped noise."""
    blurred = convolve_psf(project(cube, geom, optics), optics.sigma_psf)
    return add_noise(blurred, optics.noise_sigma, seed)
