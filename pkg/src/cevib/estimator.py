"""Causal quantities from a fitted model via interventional Monte Carlo.

Subjects are empirical draws from the covariate pool; for each subject the
latent posterior is sampled and both outcome heads are evaluated on the SAME
draws (common random numbers), so the per-subject effect is a paired mean of
head differences.  The treatment head and observed treatments never enter:
the intervention severs them, and the operations take no treatment input.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NotFittedError
from .model import CevibModel
from .rng import RngStream

__all__ = ["EffectEstimate", "estimate_ate", "estimate_ite"]

# cap on draws * subjects held in memory at once
_CHUNK_CELLS = 200_000


@dataclass(frozen=True)
class EffectEstimate:
    ate: float
    ite: np.ndarray
    n_latent_samples: int
    n_subjects: int


def _ite_matrix_mean(model: CevibModel, x_pool, rng: RngStream,
                     n_latent_samples: int, noisy_outcomes: bool) -> np.ndarray:
    if not model.fitted:
        raise NotFittedError("effect estimation requires a fitted model")
    x_pool = np.asarray(x_pool, dtype=np.float64)
    if x_pool.ndim != 2 or x_pool.shape[0] == 0:
        raise ValueError("covariate pool must be a nonempty 2-D array")
    if n_latent_samples < 1:
        raise ValueError("n_latent_samples must be >= 1")

    post = model.encode(x_pool)
    n, k = post.mu.shape
    ite_sum = np.zeros(n)
    done = 0
    chunk = max(1, _CHUNK_CELLS // n)
    while done < n_latent_samples:
        m = min(chunk, n_latent_samples - done)
        eps = rng.normal((m, n, k))
        z = (post.mu[None] + post.sigma[None] * eps).reshape(m * n, k)
        y0, y1 = model.outcome_means_from_latent(z)
        diff = (y1 - y0).reshape(m, n)
        if noisy_outcomes:
            # unit-variance outcome noise in model (standardized) units,
            # independent per arm; zero-mean, so it only widens the spread
            scale = model.y_scaler.std if model.y_scaler is not None else 1.0
            noise = rng.normal((2, m, n)) * scale
            diff = diff + noise[1] - noise[0]
        ite_sum += diff.sum(axis=0)
        done += m
    return ite_sum / n_latent_samples


def estimate_ite(model: CevibModel, x, rng: RngStream, n_latent_samples: int,
                 noisy_outcomes: bool = False) -> np.ndarray:
    """Per-subject effect: mean over latent draws of the paired head difference."""
    return _ite_matrix_mean(model, x, rng, n_latent_samples, noisy_outcomes)


def estimate_ate(model: CevibModel, x_pool, rng: RngStream, n_latent_samples: int,
                 noisy_outcomes: bool = False) -> EffectEstimate:
    """Average effect over the empirical pool, with the per-subject effects.

    Both potential-outcome means use the same subjects and the same latent
    draws, so ``ate`` is exactly the mean of ``ite``.
    """
    ite = _ite_matrix_mean(model, x_pool, rng, n_latent_samples, noisy_outcomes)
    return EffectEstimate(ate=float(ite.mean()), ite=ite,
                          n_latent_samples=n_latent_samples, n_subjects=ite.size)
