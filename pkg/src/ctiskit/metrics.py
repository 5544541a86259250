"""Reconstruction error metrics: MSE and PSNR on an 8-bit intensity scale."""

from __future__ import annotations

import math

import numpy as np

from .core import HyperCube

PEAK = 255.0  # fixed 8-bit peak; deliberately not configurable


def mse(a: HyperCube, b: HyperCube) -> float:
    """Mean squared voxel difference."""
    if a.data.shape != b.data.shape:
        raise ValueError(f"cube shapes differ: {a.data.shape} vs {b.data.shape}")
    diff = a.data - b.data
    return float(np.mean(diff * diff))


def psnr(mse_value: float) -> float:
    """Peak signal-to-noise ratio in dB; an MSE of zero maps to infinity."""
    if mse_value < 0:
        raise ValueError("mse must be >= 0")
    if mse_value == 0:
        return math.inf
    return 10.0 * math.log10(PEAK * PEAK / mse_value)
