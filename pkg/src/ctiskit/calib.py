"""Optical calibration: slanted-edge PSF width, diffraction sensitivity,
and blackbody illumination fitting.

The PSF estimate follows the simplified slanted-edge recipe: the edge
spread function is the per-column mean over the region of interest, the
line spread function is its discrete derivative, and the PSF width is the
standard deviation of a least-squares Gaussian fitted to the absolute LSF.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .core import CtisImage, FormatError, SpectralCurve

# CODATA constants (SI)
PLANCK_H = 6.62607015e-34
SPEED_OF_LIGHT = 299792458.0
BOLTZMANN_K = 1.380649e-23

GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class GaussianFit:
    amplitude: float
    mean: float
    sigma: float
    r_squared: float

    def __post_init__(self):
        if self.sigma <= 0:
            raise ValueError("fitted sigma must be > 0")
        if self.r_squared > 1:
            raise ValueError("r_squared cannot exceed 1")


@dataclass(frozen=True)
class SensitivityTable:
    """Per-order sensitivity rows sampled on a wavelength grid."""

    wavelengths: np.ndarray  # (n,) nm, strictly increasing
    values: np.ndarray  # (orders, n), >= 0

    def __post_init__(self):
        wl = np.ascontiguousarray(self.wavelengths, dtype=np.float64)
        vals = np.ascontiguousarray(self.values, dtype=np.float64)
        if wl.ndim != 1 or not (np.diff(wl) > 0).all():
            raise ValueError("wavelengths must be 1-D and strictly increasing")
        if vals.ndim != 2 or vals.shape[1] != wl.size:
            raise ValueError("values must be orders x len(wavelengths)")
        if not np.isfinite(vals).all() or (vals < 0).any():
            raise ValueError("sensitivities must be finite and >= 0")
        wl.setflags(write=False)
        vals.setflags(write=False)
        object.__setattr__(self, "wavelengths", wl)
        object.__setattr__(self, "values", vals)

    @property
    def n_orders(self) -> int:
        return self.values.shape[0]


def _golden_min(fun, lo: float, hi: float, iterations: int = 80):
    """Golden-section minimizer for a unimodal 1-D objective."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = fun(c), fun(d)
    for _ in range(iterations):
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = fun(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = fun(d)
    x = (a + b) / 2.0
    return x, fun(x)


def _fit_gaussian_profile(x: np.ndarray, y: np.ndarray,
                          sigma_lo: float = 0.2,
                          sigma_hi: float = 10.0) -> GaussianFit:
    """Least-squares Gaussian fit: grid over sigma, then golden refinement.

    The mean is the intensity centroid and the amplitude is solved linearly
    per candidate sigma, keeping the search one dimensional.
    """
    total = y.sum()
    if total <= 0:
        raise ValueError("profile has no mass to fit")
    mean = float((x * y).sum() / total)
    ss_tot = float(((y - y.mean()) ** 2).sum())

    def cost(sigma: float) -> float:
        w = np.exp(-((x - mean) ** 2) / (2.0 * sigma * sigma))
        denom = float((w * w).sum())
        if denom == 0:
            return float((y * y).sum())
        amp = float((w * y).sum() / denom)
        resid = y - amp * w
        return float((resid * resid).sum())

    grid = np.geomspace(sigma_lo, sigma_hi, 60)
    costs = [cost(s) for s in grid]
    best = int(np.argmin(costs))
    lo = grid[max(best - 1, 0)]
    hi = grid[min(best + 1, grid.size - 1)]
    sigma, ss_res = _golden_min(cost, lo, hi)

    w = np.exp(-((x - mean) ** 2) / (2.0 * sigma * sigma))
    amp = float((w * y).sum() / (w * w).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    return GaussianFit(amp, mean, float(sigma), float(r_squared))


def estimate_psf(image: CtisImage, roi: tuple[int, int, int, int]) -> GaussianFit:
    """Estimate the Gaussian PSF width from an edge inside the ROI.

    roi is (row0, col0, height, width). The edge must run roughly parallel
    to the ROI rows, i.e. the transition happens along the column axis.
    """
    row0, col0, height, width = roi
    if row0 < 0 or col0 < 0 or row0 + height > image.side \
            or col0 + width > image.side:
        raise ValueError(f"roi {roi} out of bounds for side {image.side}")
    if height < 2:
        raise ValueError("roi height must be >= 2")
    if width < 4:
        raise ValueError("roi width must be >= 4 to resolve an edge")

    patch = image.data[row0:row0 + height, col0:col0 + width]
    esf = patch.mean(axis=0)
    lsf = np.diff(esf)  # sample i sits between columns i and i+1
    profile = np.abs(lsf)

    floor = 1e-12 * max(1.0, float(np.abs(esf).max()))
    if profile.max() <= floor:
        raise ValueError("no detectable edge inside the roi")

    x = np.arange(lsf.size) + 0.5  # LSF positions relative to the ROI
    return _fit_gaussian_profile(x, profile)


def spot_photon_count(image: CtisImage, dark: CtisImage,
                      spot_box: tuple[int, int, int, int]) -> float:
    """Dark-subtracted total count over one diffraction spot box."""
    if image.side != dark.side:
        raise ValueError("image and dark frame sizes differ")
    row0, col0, height, width = spot_box
    if row0 < 0 or col0 < 0 or row0 + height > image.side \
            or col0 + width > image.side:
        raise ValueError(f"box {spot_box} out of bounds for side {image.side}")
    diff = image.data[row0:row0 + height, col0:col0 + width] \
        - dark.data[row0:row0 + height, col0:col0 + width]
    return float(np.clip(diff, 0.0, None).sum())


def diffraction_sensitivity(wavelengths: np.ndarray, spot_counts: np.ndarray,
                            exposures: np.ndarray, gains: np.ndarray,
                            corrections: np.ndarray) -> SensitivityTable:
    """Per-order sensitivity: counts normalized by exposure, gain and the
    illuminant correction factor, elementwise per wavelength."""
    counts = np.asarray(spot_counts, dtype=np.float64)
    t = np.asarray(exposures, dtype=np.float64)
    g = np.asarray(gains, dtype=np.float64)
    c = np.asarray(corrections, dtype=np.float64)
    wl = np.asarray(wavelengths, dtype=np.float64)
    if counts.ndim != 2 or counts.shape[1] != wl.size:
        raise ValueError("spot_counts must be orders x len(wavelengths)")
    for name, vec in (("exposures", t), ("gains", g), ("corrections", c)):
        if vec.shape != wl.shape:
            raise ValueError(f"{name} must match the wavelength grid")
        if (vec <= 0).any():
            raise ValueError(f"{name} must be strictly positive")
    if (counts < 0).any():
        raise ValueError("spot_counts must be >= 0")
    return SensitivityTable(wl, counts / (t * g * c))


def interpolate_sensitivity(table: SensitivityTable,
                            target_wavelengths) -> np.ndarray:
    """Piecewise-linear per-order interpolation onto the channel grid."""
    targets = np.asarray(target_wavelengths, dtype=np.float64)
    lo, hi = table.wavelengths[0], table.wavelengths[-1]
    if (targets < lo).any() or (targets > hi).any():
        raise ValueError(
            f"targets must lie within [{lo}, {hi}] nm; extrapolation refused"
        )
    return np.vstack([
        np.interp(targets, table.wavelengths, row) for row in table.values
    ])


def planck_radiance(wavelengths_nm, temperature: float) -> np.ndarray:
    """Planck spectral radiance (wavelength form, SI units)."""
    lam = np.asarray(wavelengths_nm, dtype=np.float64) * 1e-9
    hc = PLANCK_H * SPEED_OF_LIGHT
    return (2.0 * hc * SPEED_OF_LIGHT / lam ** 5
            / np.expm1(hc / (lam * BOLTZMANN_K * temperature)))


def fit_blackbody(spectrum: SpectralCurve,
                  bracket: tuple[float, float] = (1000.0, 10000.0)
                  ) -> tuple[float, float]:
    """Fit A * planck(lambda, T) to a measured spectrum.

    The temperature comes from a 1-D search over the bracket with the
    amplitude solved linearly at each candidate; the fit itself runs on
    curves normalized to unit peak so the scale cannot bias T.
    """
    if len(spectrum) < 10:
        raise ValueError("need at least 10 spectral samples")
    if (spectrum.wavelengths <= 0).any():
        raise ValueError("wavelengths must be positive")
    peak = float(spectrum.values.max())
    if peak <= 0:
        raise ValueError("spectrum has no positive values")

    lo, hi = bracket
    if not 0 < lo < hi:
        raise ValueError(f"invalid bracket {bracket}")
    y = spectrum.values / peak

    def cost(temp: float) -> float:
        model = planck_radiance(spectrum.wavelengths, temp)
        model = model / model.max()
        amp = float((model * y).sum() / (model * model).sum())
        resid = y - amp * model
        return float((resid * resid).sum())

    grid = np.linspace(lo, hi, 200)
    costs = [cost(t) for t in grid]
    best = int(np.argmin(costs))
    if best in (0, grid.size - 1):
        raise ValueError(
            f"no interior optimum inside the bracket {bracket}; widen it"
        )
    temp, _ = _golden_min(cost, grid[best - 1], grid[best + 1])

    model = planck_radiance(spectrum.wavelengths, temp)
    model_peak = float(model.max())
    model = model / model_peak
    amp_norm = float((model * y).sum() / (model * model).sum())
    amplitude = amp_norm * peak / model_peak
    return float(temp), amplitude


# ---------------------------------------------------------------------------
# Sensitivity tables as CSV: wavelength column plus one column per order.
# ---------------------------------------------------------------------------

def write_sensitivity_table(table: SensitivityTable, destination) -> None:
    if hasattr(destination, "write"):
        _write_table_rows(table, destination)
    else:
        with open(destination, "w", newline="") as fh:
            _write_table_rows(table, fh)


def _write_table_rows(table: SensitivityTable, fh) -> None:
    writer = csv.writer(fh)
    writer.writerow(["wavelength_nm"]
                    + [f"s{i}" for i in range(table.n_orders)])
    for j, wl in enumerate(table.wavelengths):
        writer.writerow([repr(float(wl))]
                        + [repr(float(v)) for v in table.values[:, j]])


def read_sensitivity_table(source) -> SensitivityTable:
    if hasattr(source, "read"):
        rows = list(csv.reader(source))
    else:
        with open(source, newline="") as fh:
            rows = list(csv.reader(fh))
    if not rows or len(rows[0]) < 2:
        raise FormatError("sensitivity CSV needs a header and >= 2 columns")
    body = rows[1:]
    try:
        wl = np.array([float(r[0]) for r in body])
        vals = np.array([[float(v) for v in r[1:]] for r in body]).T
    except (ValueError, IndexError) as exc:
        raise FormatError(f"malformed sensitivity CSV row: {exc}") from exc
    return SensitivityTable(wl, vals)
