"""Closed-form least-squares reference methods.

ols1 regresses the outcome on [1, x, t] and reads the effect off the
treatment coefficient; ols2 fits one regression per arm and differences the
arm predictions per subject.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .datasets import CausalDataset
from .errors import NotFittedError, PositivityError

__all__ = ["OlsModel", "fit_ols", "ols_ite"]

RIDGE = 1e-8  # jitter on the normal equations, for rank safety only

VARIANTS = ("ols1", "ols2")


@dataclass
class OlsModel:
    variant: str
    coef: np.ndarray | None = None          # ols1: over [1, x, t]
    coef0: np.ndarray | None = None         # ols2: per-arm over [1, x]
    coef1: np.ndarray | None = None
    fitted: bool = field(default=False)


def _solve(design: np.ndarray, y: np.ndarray) -> np.ndarray:
    gram = design.T @ design
    gram[np.diag_indices_from(gram)] += RIDGE
    return np.linalg.solve(gram, design.T @ y)


def fit_ols(variant: str, dataset: CausalDataset) -> OlsModel:
    if variant not in VARIANTS:
        raise ValueError(f"unknown variant {variant!r}, expected one of {VARIANTS}")
    x, t, y = dataset.x, dataset.t, dataset.y_factual
    ones = np.ones((dataset.n, 1))
    if variant == "ols1":
        design = np.hstack([ones, x, t[:, None]])
        return OlsModel(variant="ols1", coef=_solve(design, y), fitted=True)
    model = OlsModel(variant="ols2")
    for arm in (0, 1):
        mask = t == arm
        if not mask.any():
            raise PositivityError(f"ols2 requires subjects in arm t={arm}, found none")
        design = np.hstack([ones[mask], x[mask]])
        setattr(model, f"coef{arm}", _solve(design, y[mask]))
    model.fitted = True
    return model


def ols_ite(model: OlsModel, x) -> np.ndarray:
    """Per-subject effect predictions in original outcome units."""
    if not model.fitted:
        raise NotFittedError(f"{model.variant} model is not fitted")
    x = np.asarray(x, dtype=np.float64)
    n = x.shape[0]
    if model.variant == "ols1":
        return np.full(n, model.coef[-1])
    design = np.hstack([np.ones((n, 1)), x])
    return design @ model.coef1 - design @ model.coef0
