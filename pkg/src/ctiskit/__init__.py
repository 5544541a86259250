"""Tomographic reconstruction toolkit for snapshot spectral imaging.

Simulates sensor images from hyperspectral cubes, builds the sparse system
matrix, reconstructs cubes with the iterative EM algorithm (with pluggable
initialization for hybrid learned-plus-iterative schemes), and provides
the optical calibration and dataset-preparation procedures around it.
"""

from .calib import (
    GaussianFit,
    SensitivityTable,
    diffraction_sensitivity,
    estimate_psf,
    fit_blackbody,
    interpolate_sensitivity,
    planck_radiance,
    spot_photon_count,
)
from .core import (
    CtisImage,
    FormatError,
    GeometryParams,
    HyperCube,
    OpticalParams,
    SpectralCurve,
    read_cube,
    read_image,
    read_spectrum,
    write_cube,
    write_image,
    write_spectrum,
)
from .em import EmConfig, EmResult, TraceRecord, em_reconstruct, init_cube
from .metrics import mse, psnr
from .pipeline import (
    DatasetConfig,
    DatasetManifest,
    ManifestEntry,
    assemble_tiles,
    crop_samples,
    generate_dataset,
    partition,
    read_manifest,
    spectral_bin,
    split_tiles,
    write_manifest,
)
from .simulator import (
    OrderVector,
    add_noise,
    convolve_psf,
    image_side,
    order_vectors,
    project,
    simulate,
    spot_origin,
)
from .sysmat import (
    SparseSystemMatrix,
    build_h,
    export_matrix_market,
    matvec,
    rmatvec,
)

__version__ = "0.1.0"

__all__ = [
    "CtisImage",
    "DatasetConfig",
    "DatasetManifest",
    "EmConfig",
    "EmResult",
    "FormatError",
    "GaussianFit",
    "GeometryParams",
    "HyperCube",
    "ManifestEntry",
    "OpticalParams",
    "OrderVector",
    "SensitivityTable",
    "SparseSystemMatrix",
    "SpectralCurve",
    "TraceRecord",
    "add_noise",
    "assemble_tiles",
    "build_h",
    "convolve_psf",
    "crop_samples",
    "diffraction_sensitivity",
    "em_reconstruct",
    "estimate_psf",
    "export_matrix_market",
    "fit_blackbody",
    "generate_dataset",
    "image_side",
    "init_cube",
    "interpolate_sensitivity",
    "matvec",
    "mse",
    "order_vectors",
    "partition",
    "planck_radiance",
    "project",
    "psnr",
    "read_cube",
    "read_image",
    "read_manifest",
    "read_spectrum",
    "rmatvec",
    "simulate",
    "spectral_bin",
    "split_tiles",
    "spot_origin",
    "spot_photon_count",
    "write_cube",
    "write_image",
    "write_manifest",
    "write_spectrum",
]
