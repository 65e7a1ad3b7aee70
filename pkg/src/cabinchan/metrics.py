"""Scalar comparison metrics for PDP taps and TDL models."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, DomainError
from .types import TdlModel


def _paired_vectors(a, b) -> tuple[np.ndarray, np.ndarray]:
    av = np.asarray(a, dtype=np.float64).ravel()
    bv = np.asarray(b, dtype=np.float64).ravel()
    if av.size == 0 or bv.size == 0:
        raise DomainError("metric inputs must be non-empty")
    if av.size != bv.size:
        raise DimensionError(f"length mismatch: {av.size} vs {bv.size}")
    if not (np.all(np.isfinite(av)) and np.all(np.isfinite(bv))):
        raise DomainError("metric inputs must be finite")
    return av, bv


def rmse(a, b) -> float:
    """Root-mean-square difference between two equal-length vectors."""
    av, bv = _paired_vectors(a, b)
    return float(np.sqrt(np.mean((av - bv) ** 2)))


def r_squared(reference, candidate) -> float:
    """Coefficient of determination of `candidate` against `reference`.

    SS_tot is taken about the mean of the reference, so the result is 1 only
    when the vectors are identical and can be negative for poor fits.
    """
    ref, cand = _paired_vectors(reference, candidate)
    ss_tot = float(np.sum((ref - ref.mean()) ** 2))
    if ss_tot == 0.0:
        raise DomainError("r_squared is undefined for a zero-variance reference")
    ss_res = float(np.sum((ref - cand) ** 2))
    return 1.0 - ss_res / ss_tot


def _bin_keys(model: TdlModel) -> dict[int, float]:
    # Delay keys rounded to 1 ps: models built on the same bin grid collide
    # exactly, unrelated delays essentially never do.
    return {round(d * 1e12): p for d, p in model.taps}


def average_tap_error(reference: TdlModel, candidate: TdlModel) -> float:
    """Mean per-tap power deviation, normalized by the reference dynamic range.

    Taps are matched by delay bin.  Shared bins contribute
    |P_cand - P_ref| / threshold_db; a bin present in only one model
    contributes its full height above the reference threshold floor.
    """
    if reference.n_taps == 0:
        raise DomainError("reference TDL model must be non-empty")
    dynamic_range = reference.threshold_db
    floor_db = reference.peak_power_db - dynamic_range
    ref_bins = _bin_keys(reference)
    cand_bins = _bin_keys(candidate)
    total = 0.0
    keys = set(ref_bins) | set(cand_bins)
    for key in keys:
        if key in ref_bins and key in cand_bins:
            total += abs(cand_bins[key] - ref_bins[key])
        elif key in ref_bins:
            total += abs(ref_bins[key] - floor_db)
        else:
            total += abs(cand_bins[key] - floor_db)
    return total / (dynamic_range * len(keys))
