"""Tabular data synthesis: conditional adversarial generation with
spectral stability monitoring.

The heavy lifting lives in the compiled extension ``rccsyn._core``;
this package re-exports its public surface.
"""

from ._core import (
    dcr,
    derive_seed,
    detect_onset,
    evaluate_csv,
    fit_csv,
    ims,
    ks_statistic,
    mgf_cantor,
    nndr,
    sample_cantor,
    sample_csv,
    stability_metric,
    svd_spectrum,
    tv_distance,
)

__all__ = [
    "dcr",
    "derive_seed",
    "detect_onset",
    "evaluate_csv",
    "fit_csv",
    "ims",
    "ks_statistic",
    "mgf_cantor",
    "nndr",
    "sample_cantor",
    "sample_csv",
    "stability_metric",
    "svd_spectrum",
    "tv_distance",
]
