"""Iterative EM reconstruction with pluggable initialization.

One update combines the expectation and maximization steps:

    f[k+1] = (f[k] / colsum) * H^T (g / (H f[k]))

where colsum is the per-voxel column sum of the system matrix. All factors
are non-negative, so non-negativity of the estimate is preserved. The
initializer is either the all-ones cube, the back-projection H^T g, or an
externally supplied cube file, which is how a learned predictor hands its
output to the EM stage.
"""

from __future__ import annotations

import csv
import os
from dataclasses import dataclass, field

import numpy as np

from .core import CtisImage, HyperCube, read_cube
from .sysmat import SparseSystemMatrix, matvec, rmatvec


@dataclass(frozen=True)
class EmConfig:
    """Iteration budget, initializer and numerical guards.

    init accepts "ones", "backprojection", a path to an HCUB file, or an
    in-memory cube. epsilon guards the per-pixel ratio denominator.
    """

    iterations: int = 20
    init: object = "ones"
    epsilon: float = 1e-12
    record_trace: bool = False

    def __post_init__(self):
        if self.iterations < 1:
            raise ValueError("iterations must be >= 1")
        if self.epsilon <= 0:
            raise ValueError("epsilon must be > 0")


@dataclass(frozen=True)
class TraceRecord:
    iteration: int
    data_residual: float
    mse_vs_truth: float | None = None


@dataclass(frozen=True)
class EmResult:
    cube: HyperCube
    trace: tuple[TraceRecord, ...] = field(default=())


def init_cube(h: SparseSystemMatrix, image: CtisImage, mode) -> np.ndarray:
    """Resolve the initial flattened cube estimate for a reconstruction."""
    if isinstance(mode, HyperCube):
        cube = mode
    elif mode == "ones":
        return np.ones(h.cols)
    elif mode == "backprojection":
        return rmatvec(h, image.ravel())
    elif isinstance(mode, (str, os.PathLike)):
        cube = read_cube(mode)
    else:
        raise ValueError(f"unsupported init mode {mode!r}")
    if (cube.height, cube.width, cube.channels) != h.cube_shape:
        raise ValueError(
            f"init cube shape {cube.data.shape} does not match system "
            f"matrix cube shape {h.cube_shape}"
        )
    return cube.ravel().astype(np.float64)


def em_reconstruct(h: SparseSystemMatrix, image: CtisImage, config: EmConfig,
                   truth: HyperCube | None = None) -> EmResult:
    """Run the multiplicative EM update for a fixed number of iterations.

    A per-iteration trace (mean squared data residual, plus error against
    the ground truth when one is supplied) is recorded when requested;
    iteration 0 describes the initial estimate.
    """
    if image.side != h.side:
        raise ValueError(f"image side {image.side} does not match system "
                         f"matrix side {h.side}")
    if truth is not None and (truth.height, truth.width,
                              truth.channels) != h.cube_shape:
        raise ValueError("truth cube shape does not match system matrix")

    g = image.ravel().astype(np.float64)
    f = init_cube(h, image, config.init)
    if (f < 0).any():
        raise ValueError("initial cube estimate contains negative values")

    colsum = h.col_sums
    live = colsum > 0
    inv_colsum = np.zeros_like(colsum)
    inv_colsum[live] = 1.0 / colsum[live]
    truth_vec = truth.ravel() if truth is not None else None

    trace: list[TraceRecord] = []

    def record(iteration: int, estimate: np.ndarray) -> None:
        residual = float(np.mean((g - matvec(h, estimate)) ** 2))
        err = None
        if truth_vec is not None:
            err = float(np.mean((estimate - truth_vec) ** 2))
        trace.append(TraceRecord(iteration, residual, err))

    if config.record_trace:
        record(0, f)

    for iteration in range(1, config.iterations + 1):
        predicted = matvec(h, f)
        ratio = g / np.maximum(predicted, config.epsilon)
        f = np.where(live, f * rmatvec(h, ratio) * inv_colsum, 0.0)
        if not np.isfinite(f).all():
            raise ValueError(
                f"non-finite estimate at iteration {iteration}; the input "
                "image is inconsistent with the system matrix"
            )
        if config.record_trace:
            record(iteration, f)

    cube = HyperCube(f.reshape(h.cube_shape))
    return EmResult(cube, tuple(trace))


def write_trace(trace, destination) -> None:
    """Emit the trace as CSV: iteration,data_residual,mse_vs_truth."""
    if hasattr(destination, "write"):
        _write_trace_rows(trace, destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write_trace_rows(trace, fh)


def _write_trace_rows(trace, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["iteration", "data_residual", "mse_vs_truth"])
    for rec in trace:
        err = "" if rec.mse_vs_truth is None else repr(rec.mse_vs_truth)
        writer.writerow([rec.iteration, repr(rec.data_residual), err])
