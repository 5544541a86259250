"""Shared fixtures and independent oracles.

The dense forward model below re-derives the canvas size, spot placement
and blur stencil from scratch with naive loops. It shares no code with the
library, so it can serve as a brute-force reference for both the direct
simulator and the sparse system matrix.
"""

import math

import numpy as np
import pytest

import ctiskit as ck

ALL_ORDER_DIRECTIONS = [(-1, -1), (-1, 0), (-1, 1), (0, -1), (0, 0),
                        (0, 1), (1, -1), (1, 0), (1, 1)]
AXIS_ORDER_DIRECTIONS = [(-1, 0), (0, -1), (0, 0), (0, 1), (1, 0)]


def naive_kernel(sigma):
    """2-D Gaussian stencil: taps on [-ceil(4s), ceil(4s)], sum one."""
    if sigma == 0:
        return np.ones((1, 1))
    radius = math.ceil(4.0 * sigma)
    size = 2 * radius + 1
    kern = np.empty((size, size))
    for i in range(size):
        for j in range(size):
            d2 = (i - radius) ** 2 + (j - radius) ** 2
            kern[i, j] = math.exp(-d2 / (2.0 * sigma * sigma))
    return kern / kern.sum()


def naive_origin(geom, di, dj, channel):
    span = geom.x + geom.shift * (geom.z - 1)
    zeroth = geom.b2 + span + geom.b1
    out = []
    for direction in (di, dj):
        if direction == 0:
            out.append(zeroth)
        else:
            offset = geom.b1 + geom.x + geom.shift * channel
            out.append(zeroth + direction * offset)
    return tuple(out)


def dense_h(geom, optics):
    """Brute-force dense system matrix, one voxel at a time."""
    q = geom.x + 2 * geom.b1 + 2 * geom.b2 \
        + 2 * (geom.x + geom.shift * (geom.z - 1))
    directions = ALL_ORDER_DIRECTIONS if geom.all_orders \
        else AXIS_ORDER_DIRECTIONS
    kern = naive_kernel(optics.sigma_psf)
    radius = kern.shape[0] // 2
    r = geom.y * geom.x * geom.z
    h = np.zeros((q * q, r))
    for row in range(geom.y):
        for col in range(geom.x):
            for ch in range(geom.z):
                voxel = (row * geom.x + col) * geom.z + ch
                for s, (di, dj) in enumerate(directions):
                    weight = optics.diff_sens[s, ch] * optics.illum[ch]
                    if weight == 0:
                        continue
                    r0, c0 = naive_origin(geom, di, dj, ch)
                    pr, pc = r0 + row, c0 + col
                    for u in range(kern.shape[0]):
                        for v in range(kern.shape[1]):
                            rr = pr + u - radius
                            cc = pc + v - radius
                            if 0 <= rr < q and 0 <= cc < q:
                                h[rr * q + cc, voxel] += weight * kern[u, v]
    return h


def dense_forward(cube, geom, optics):
    """Noiseless forward model through the brute-force dense matrix."""
    return dense_h(geom, optics) @ cube.data.reshape(-1)


def random_instance(rng, max_x=8, max_z=4):
    """A random small geometry with strictly positive optics."""
    x = int(rng.integers(2, max_x + 1))
    z = int(rng.integers(1, max_z + 1))
    geom = ck.GeometryParams(
        x=x, y=x, z=z,
        b1=int(rng.integers(0, 4)),
        b2=int(rng.integers(0, 3)),
        shift=int(rng.integers(1, 3)),
        all_orders=bool(rng.integers(0, 2)),
    )
    optics = ck.OpticalParams(
        diff_sens=rng.uniform(0.1, 2.0, (geom.n_orders, z)),
        illum=rng.uniform(0.1, 2.0, z),
        sigma_psf=float(rng.uniform(0.0, 1.5)),
        noise_sigma=0.0,
    )
    return geom, optics


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
