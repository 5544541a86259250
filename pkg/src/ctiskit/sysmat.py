"""Sparse system matrix construction and the kernels the EM solver needs.

The matrix maps the flattened cube (channel fastest) to the flattened
sensor image (row major): column i is the vectorized, PSF-convolved sensor
response to a unit intensity in voxel i. Shift invariance keeps the build
cheap: there is one blur stencil per (order, channel) pair, translated to
every spatial position.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from scipy import sparse

from .core import GeometryParams, OpticalParams
from .simulator import (
    gaussian_kernel,
    image_side,
    order_vectors,
    spot_origin,
)

DEFAULT_NNZ_CAP = 50_000_000


@dataclass(frozen=True)
class SparseSystemMatrix:
    """CSC system matrix with cached column sums and the shapes it connects."""

    matrix: sparse.csc_matrix
    col_sums: np.ndarray
    side: int  # q: sensor image side
    cube_shape: tuple[int, int, int]  # (height, width, channels)

    @property
    def rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def cols(self) -> int:
        return self.matrix.shape[1]

    @property
    def nnz(self) -> int:
        return self.matrix.nnz


def estimate_nnz(geom: GeometryParams, optics: OpticalParams) -> int:
    """Upper bound on stored entries: r * orders * kernel area."""
    taps = gaussian_kernel(optics.sigma_psf)
    r = geom.x * geom.y * geom.z
    return r * geom.n_orders * taps.size * taps.size


def build_h(geom: GeometryParams, optics: OpticalParams,
            nnz_cap: int = DEFAULT_NNZ_CAP) -> SparseSystemMatrix:
    """Assemble the q^2 x r system matrix.

    Noise is never part of the matrix. Stencils clipped by the canvas
    border are truncated, matching the simulator's zero-padded convolution.
    Raises MemoryError when the predicted entry count exceeds nnz_cap.
    """
    if optics.n_orders != geom.n_orders or optics.channels != geom.z:
        raise ValueError("optics dimensions do not match geometry")
    predicted = estimate_nnz(geom, optics)
    if predicted > nnz_cap:
        raise MemoryError(
            f"predicted nnz {predicted} exceeds cap {nnz_cap}; raise nnz_cap "
            "to build anyway"
        )

    q = image_side(geom)
    taps = gaussian_kernel(optics.sigma_psf)
    kernel = np.outer(taps, taps)
    radius = taps.size // 2
    height, width, channels = geom.cube_shape
    r = height * width * channels

    rows_grid, cols_grid = np.meshgrid(
        np.arange(height), np.arange(width), indexing="ij"
    )
    rows_grid = rows_grid.ravel()
    cols_grid = cols_grid.ravel()
    # voxel index of (row, col, k) is (row*width + col)*channels + k
    voxel_base = (rows_grid * width + cols_grid) * channels

    out_rows: list[np.ndarray] = []
    out_cols: list[np.ndarray] = []
    out_vals: list[np.ndarray] = []
    for s, order in enumerate(order_vectors(geom.all_orders)):
        for k in range(channels):
            weight = optics.diff_sens[s, k] * optics.illum[k]
            if weight == 0.0:
                continue
            r0, c0 = spot_origin(geom, order, k)
            voxels = voxel_base + k
            for du in range(kernel.shape[0]):
                pix_r = rows_grid + (r0 + du - radius)
                row_ok = (pix_r >= 0) & (pix_r < q)
                for dv in range(kernel.shape[1]):
                    pix_c = cols_grid + (c0 + dv - radius)
                    ok = row_ok & (pix_c >= 0) & (pix_c < q)
                    if not ok.all():
                        pr, pc, vox = pix_r[ok], pix_c[ok], voxels[ok]
                    else:
                        pr, pc, vox = pix_r, pix_c, voxels
                    out_rows.append(pr * q + pc)
                    out_cols.append(vox)
                    out_vals.append(
                        np.full(vox.size, weight * kernel[du, dv])
                    )

    if out_vals:
        coo = sparse.coo_matrix(
            (np.concatenate(out_vals),
             (np.concatenate(out_rows), np.concatenate(out_cols))),
            shape=(q * q, r),
        )
        matrix = coo.tocsc()
        matrix.eliminate_zeros()
    else:
        matrix = sparse.csc_matrix((q * q, r))
    col_sums = np.asarray(matrix.sum(axis=0)).ravel()
    return SparseSystemMatrix(matrix, col_sums, q, geom.cube_shape)


def matvec(h: SparseSystemMatrix, f: np.ndarray) -> np.ndarray:
    """Sensor image vector for a flattened cube: the forward projection."""
    f = np.asarray(f, dtype=np.float64)
    if f.shape != (h.cols,):
        raise ValueError(f"expected cube vector of length {h.cols}, "
                         f"got shape {f.shape}")
    return h.matrix @ f


def rmatvec(h: SparseSystemMatrix, v: np.ndarray) -> np.ndarray:
    """Back-projection: transpose product with a flattened sensor image."""
    v = np.asarray(v, dtype=np.float64)
    if v.shape != (h.rows,):
        raise ValueError(f"expected image vector of length {h.rows}, "
                         f"got shape {v.shape}")
    return h.matrix.T @ v


def export_matrix_market(h: SparseSystemMatrix, sink) -> None:
    """Write coordinate-format Matrix Market text (1-based, general real)."""
    if hasattr(sink, "write"):
        _write_mm(h, sink)
    else:
        with open(sink, "w") as fh:
            _write_mm(h, fh)


def _write_mm(h: SparseSystemMatrix, fh) -> None:
    coo = h.matrix.tocoo()
    fh.write("%%MatrixMarket matrix coordinate real general\n")
    fh.write(f"{h.rows} {h.cols} {coo.nnz}\n")
    for i, j, v in zip(coo.row, coo.col, coo.data):
        fh.write(f"{i + 1} {j + 1} {float(v)!r}\n")


# ---------------------------------------------------------------------------
# On-disk cache so repeated reconstructions skip the build.
# ---------------------------------------------------------------------------

def cache_key(geom: GeometryParams, optics: OpticalParams) -> str:
    digest = hashlib.sha256()
    digest.update(repr((geom.x, geom.y, geom.z, geom.b1, geom.b2, geom.shift,
                        geom.all_orders, float(optics.sigma_psf))).encode())
    digest.update(np.ascontiguousarray(optics.diff_sens).tobytes())
    digest.update(np.ascontiguousarray(optics.illum).tobytes())
    return digest.hexdigest()


def save_h(h: SparseSystemMatrix, path, key: str = "") -> None:
    matrix = h.matrix
    np.savez_compressed(
        path,
        data=matrix.data,
        indices=matrix.indices,
        indptr=matrix.indptr,
        shape=np.array(matrix.shape),
        col_sums=h.col_sums,
        side=np.array([h.side]),
        cube_shape=np.array(h.cube_shape),
        key=np.frombuffer(key.encode(), dtype=np.uint8),
    )


def load_h(path, expected_key: str | None = None) -> SparseSystemMatrix:
    with np.load(path) as blob:
        stored_key = bytes(blob["key"]).decode()
        if expected_key is not None and stored_key != expected_key:
            raise ValueError("cached matrix was built for different parameters")
        matrix = sparse.csc_matrix(
            (blob["data"], blob["indices"], blob["indptr"]),
            shape=tuple(blob["shape"]),
        )
        return SparseSystemMatrix(
            matrix,
            blob["col_sums"],
            int(blob["side"][0]),
            tuple(int(v) for v in blob["cube_shape"]),
        )
