"""Central finite differences, the oracle used against every analytic gradient."""

from __future__ import annotations

import numpy as np

__all__ = ["finite_diff_gradient", "relative_errors"]


def finite_diff_gradient(f, params: np.ndarray, step: float = 1e-4) -> np.ndarray:
    """Central-difference gradient of a scalar function of a flat vector.

    Error is O(step^2) for smooth f.  Raises if f returns a non-finite value
    at any perturbed point.
    """
    params = np.asarray(params, dtype=np.float64)
    grad = np.empty_like(params)
    work = params.copy()
    for i in range(params.size):
        orig = work[i]
        work[i] = orig + step
        f_plus = float(f(work))
        work[i] = orig - step
        f_minus = float(f(work))
        work[i] = orig
        if not (np.isfinite(f_plus) and np.isfinite(f_minus)):
            raise FloatingPointError(
                f"objective non-finite at perturbation of coordinate {i}")
        grad[i] = (f_plus - f_minus) / (2.0 * step)
    return grad


def relative_errors(analytic: np.ndarray, numeric: np.ndarray,
                    floor: float = 1e-8) -> np.ndarray:
    """Per-coordinate |a - n| / max(|a|, |n|, floor)."""
    analytic = np.asarray(analytic, dtype=np.float64)
    numeric = np.asarray(numeric, dtype=np.float64)
    denom = np.maximum(np.maximum(np.abs(analytic), np.abs(numeric)), floor)
    return np.abs(analytic - numeric) / denom
