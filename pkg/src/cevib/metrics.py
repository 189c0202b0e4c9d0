"""Evaluation metrics for treatment-effect estimates and their aggregation.

All three metrics compare a vector of true per-subject effects against a
predicted one and are always reported in original outcome units.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MetricError

__all__ = ["EvalReport", "eps_ate", "pehe", "rel_pehe", "evaluate", "aggregate"]

METRIC_FIELDS = ("eps_ate", "pehe", "sqrt_pehe", "rel_pehe")


@dataclass(frozen=True)
class EvalReport:
    """Per-evaluation metric bundle.

    ``scope`` is "within" (all observed subjects) or "out" (held-out test
    subjects).  ``n_excluded_rel`` counts subjects dropped from the relative
    metric because their true effect is below the exclusion threshold.
    """

    eps_ate: float
    pehe: float
    sqrt_pehe: float
    rel_pehe: float
    n_subjects: int
    n_excluded_rel: int
    scope: str


def _check_pair(ite_true, ite_pred):
    t = np.asarray(ite_true, dtype=np.float64).ravel()
    p = np.asarray(ite_pred, dtype=np.float64).ravel()
    if t.size != p.size:
        raise MetricError(f"length mismatch: {t.size} true vs {p.size} predicted effects")
    if t.size == 0:
        raise MetricError("empty effect vectors")
    return t, p


def eps_ate(ite_true, ite_pred) -> float:
    """Absolute error of the average effect: |mean(true) - mean(pred)|."""
    t, p = _check_pair(ite_true, ite_pred)
    return float(abs(t.mean() - p.mean()))


def pehe(ite_true, ite_pred) -> tuple[float, float]:
    """Mean squared per-subject effect error and its square root."""
    t, p = _check_pair(ite_true, ite_pred)
    val = float(np.mean((t - p) ** 2))
    return val, float(np.sqrt(val))


def rel_pehe(ite_true, ite_pred, min_effect: float = 1e-8) -> tuple[float, int]:
    """Mean squared relative effect error over subjects with |true| >= min_effect.

    Returns (value, number of excluded subjects).  Raises if every subject is
    excluded, since the metric is then undefined.
    """
    t, p = _check_pair(ite_true, ite_pred)
    keep = np.abs(t) >= min_effect
    n_excluded = int((~keep).sum())
    if not keep.any():
        raise MetricError(
            f"relative PEHE undefined: all {t.size} subjects have |true effect| < {min_effect}")
    val = float(np.mean(((t[keep] - p[keep]) / t[keep]) ** 2))
    return val, n_excluded


def evaluate(ite_true, ite_pred, scope: str, min_effect: float = 1e-8) -> EvalReport:
    """Compute all three metrics at once."""
    t, p = _check_pair(ite_true, ite_pred)
    mse, rmse = pehe(t, p)
    rel, n_excl = rel_pehe(t, p, min_effect)
    return EvalReport(
        eps_ate=eps_ate(t, p),
        pehe=mse,
        sqrt_pehe=rmse,
        rel_pehe=rel,
        n_subjects=t.size,
        n_excluded_rel=n_excl,
        scope=scope,
    )


def aggregate(reports: list[EvalReport]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation (n-1) per metric across reports.

    All reports must share one scope; std is 0 for a single report.
    """
    if not reports:
        raise MetricError("cannot aggregate an empty report list")
    scopes = {r.scope for r in reports}
    if len(scopes) > 1:
        raise MetricError(f"mixed scopes in aggregation: {sorted(scopes)}")
    out = {}
    for name in METRIC_FIELDS:
        vals = np.array([getattr(r, name) for r in reports], dtype=np.float64)
        std = float(vals.std(ddof=1)) if vals.size > 1 else 0.0
        out[name] = (float(vals.mean()), std)
    return out
