"""Benchmark ingestion, synthetic generation, splitting, and standardization.

File layouts
------------
IHDP   one headerless CSV per replicate, ``ihdp_npci_<i>.csv``, columns
       ``t, y_factual, y_cfactual, mu0, mu1, x1..x25``.
Twins  one CSV with a header; required columns ``t, y0, y1`` (observed-arm
       indicator and first-year mortality of the lighter/heavier twin),
       optional birth weights ``wt0, wt1``, all remaining columns are
       pair-level covariates.  t = 1 means the heavier twin is observed.
Acic   a folder with ``x.csv`` (header ``sample_id, <covariates...>``), a
       factual file ``<dgp_id>.csv`` (header ``sample_id, z, y``) and an
       optional counterfactual file ``<dgp_id>_cf.csv`` (header
       ``sample_id, y0, y1``), joined on sample id.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import DataFormatError, GenerationError, JoinError, PositivityError, SplitError
from .rng import RngStream, derive_stream

__all__ = [
    "ColumnInfo",
    "CausalDataset",
    "SplitSpec",
    "SynthConfig",
    "SyntheticData",
    "ColumnScaler",
    "load_ihdp",
    "load_twins",
    "load_acic",
    "generate_synthetic",
    "mean_shift_kl",
    "export_synthetic_csv",
    "split",
    "standardize",
]


@dataclass(frozen=True)
class ColumnInfo:
    name: str
    kind: str  # "continuous" | "binary"


def _is_binary(values: np.ndarray) -> bool:
    return bool(np.isin(values, (0.0, 1.0)).all())


def infer_columns(x: np.ndarray, names=None) -> list[ColumnInfo]:
    names = names or [f"x{j + 1}" for j in range(x.shape[1])]
    return [ColumnInfo(n, "binary" if _is_binary(x[:, j]) else "continuous")
            for j, n in enumerate(names)]


@dataclass
class CausalDataset:
    """Observational data with optional counterfactual ground truth.

    ``mu0``/``mu1`` are noiseless potential outcomes when the benchmark
    provides them; ``y_cf`` is the (possibly noisy) counterfactual outcome.
    """

    x: np.ndarray                      # (N, d)
    t: np.ndarray                      # (N,) in {0, 1}
    y_factual: np.ndarray              # (N,)
    y_cf: np.ndarray | None = None
    mu0: np.ndarray | None = None
    mu1: np.ndarray | None = None
    columns: list[ColumnInfo] = field(default_factory=list)
    provenance: str = "unknown"

    def __post_init__(self):
        self.x = np.asarray(self.x, dtype=np.float64)
        self.t = np.asarray(self.t, dtype=np.float64).ravel()
        self.y_factual = np.asarray(self.y_factual, dtype=np.float64).ravel()
        for name in ("y_cf", "mu0", "mu1"):
            v = getattr(self, name)
            if v is not None:
                setattr(self, name, np.asarray(v, dtype=np.float64).ravel())
        n = self.x.shape[0]
        if self.t.shape[0] != n or self.y_factual.shape[0] != n:
            raise DataFormatError(
                f"row counts disagree: x has {n}, t has {self.t.shape[0]}, "
                f"y has {self.y_factual.shape[0]}")
        if not np.isin(self.t, (0.0, 1.0)).all():
            bad = self.t[~np.isin(self.t, (0.0, 1.0))][0]
            raise DataFormatError(f"treatment values must be 0 or 1, found {bad!r}")
        arrays = [self.x, self.y_factual] + [
            getattr(self, a) for a in ("y_cf", "mu0", "mu1") if getattr(self, a) is not None]
        for a in arrays:
            if not np.all(np.isfinite(a)):
                raise DataFormatError("dataset contains non-finite values")
        if not self.columns:
            self.columns = infer_columns(self.x)
        if len(self.columns) != self.x.shape[1]:
            raise DataFormatError(
                f"{len(self.columns)} column descriptors for {self.x.shape[1]} columns")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def d(self) -> int:
        return self.x.shape[1]

    @property
    def has_both_arms(self) -> bool:
        return bool((self.t == 0).any() and (self.t == 1).any())

    def require_both_arms(self, context: str = "operation") -> None:
        if not self.has_both_arms:
            present = int(self.t[0]) if self.n else "none"
            raise PositivityError(
                f"{context} requires both treatment arms, but only t={present} is present")

    @property
    def binary_outcome(self) -> bool:
        return _is_binary(self.y_factual) and (self.y_cf is None or _is_binary(self.y_cf))

    @property
    def ite_true(self) -> np.ndarray:
        """Per-subject true effect: mu1 - mu0 when available, else the
        sign-corrected factual/counterfactual difference."""
        if self.mu0 is not None and self.mu1 is not None:
            return self.mu1 - self.mu0
        if self.y_cf is None:
            raise DataFormatError(
                f"{self.provenance} dataset carries no counterfactual ground truth")
        return self.t * (self.y_factual - self.y_cf) + (1 - self.t) * (self.y_cf - self.y_factual)

    @property
    def true_ate(self) -> float:
        return float(self.ite_true.mean())

    def subset(self, indices) -> "CausalDataset":
        idx = np.asarray(indices)
        pick = lambda v: None if v is None else v[idx]
        return CausalDataset(
            x=self.x[idx], t=self.t[idx], y_factual=self.y_factual[idx],
            y_cf=pick(self.y_cf), mu0=pick(self.mu0), mu1=pick(self.mu1),
            columns=self.columns, provenance=self.provenance)


# ---------------------------------------------------------------------------
# CSV parsing helpers

def _read_numeric_rows(path: Path, expected_cols: int | None) -> np.ndarray:
    rows = []
    with open(path, newline="") as fh:
        for lineno, row in enumerate(csv.reader(fh), start=1):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if expected_cols is not None and len(row) != expected_cols:
                raise DataFormatError(
                    f"{path.name}: row {lineno} has {len(row)} columns, expected {expected_cols}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path.name}: row {lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path.name}: no data rows")
    widths = {len(r) for r in rows}
    if len(widths) > 1:
        raise DataFormatError(f"{path.name}: inconsistent column counts {sorted(widths)}")
    return np.array(rows, dtype=np.float64)


def _read_header_csv(path: Path) -> tuple[list[str], np.ndarray]:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataFormatError(f"{path.name}: empty file") from None
        rows = []
        for lineno, row in enumerate(reader, start=2):
            if not row or (len(row) == 1 and not row[0].strip()):
                continue
            if len(row) != len(header):
                raise DataFormatError(
                    f"{path.name}: row {lineno} has {len(row)} columns, "
                    f"expected {len(header)}")
            try:
                rows.append([float(v) for v in row])
            except ValueError as exc:
                raise DataFormatError(f"{path.name}: row {lineno}: {exc}") from None
    if not rows:
        raise DataFormatError(f"{path.name}: no data rows")
    return header, np.array(rows, dtype=np.float64)


# ---------------------------------------------------------------------------
# Benchmark loaders

IHDP_COLS = 30  # t, y_factual, y_cfactual, mu0, mu1, 25 covariates


def load_ihdp(path, file_index: int | None = None) -> CausalDataset:
    """Load one IHDP replicate file (headerless 30-column CSV)."""
    p = Path(path)
    if p.is_dir():
        if file_index is None:
            raise DataFormatError("file_index is required when path is a directory")
        p = p / f"ihdp_npci_{file_index}.csv"
    if not p.exists():
        raise DataFormatError(f"IHDP file not found: {p}")
    data = _read_numeric_rows(p, expected_cols=IHDP_COLS)
    ds = CausalDataset(
        x=data[:, 5:], t=data[:, 0], y_factual=data[:, 1], y_cf=data[:, 2],
        mu0=data[:, 3], mu1=data[:, 4], provenance="ihdp")
    ds.require_both_arms("IHDP loading")
    return ds


TWINS_REQUIRED = ("t", "y0", "y1")


def load_twins(path) -> CausalDataset:
    """Load the twins benchmark from a single headered CSV."""
    p = Path(path)
    if p.is_dir():
        p = p / "twins.csv"
    if not p.exists():
        raise DataFormatError(f"twins file not found: {p}")
    header, data = _read_header_csv(p)
    lower = [h.lower() for h in header]
    missing = [c for c in TWINS_REQUIRED if c not in lower]
    if missing:
        raise DataFormatError(f"{p.name}: missing required columns {missing}")
    col = {name: data[:, lower.index(name)] for name in lower}
    t, y0, y1 = col["t"], col["y0"], col["y1"]
    for name, v in (("y0", y0), ("y1", y1)):
        if not _is_binary(v):
            raise DataFormatError(f"{p.name}: outcome column {name} must be 0/1 mortality")
    if "wt0" in lower and "wt1" in lower and (col["wt1"] < col["wt0"]).any():
        raise DataFormatError(f"{p.name}: wt1 must be the heavier twin's weight")
    special = set(TWINS_REQUIRED) | {"wt0", "wt1"}
    cov_idx = [j for j, h in enumerate(lower) if h not in special]
    if not cov_idx:
        raise DataFormatError(f"{p.name}: no covariate columns")
    x = data[:, cov_idx]
    names = [header[j] for j in cov_idx]
    ds = CausalDataset(
        x=x, t=t, y_factual=np.where(t == 1, y1, y0), y_cf=np.where(t == 1, y0, y1),
        mu0=y0, mu1=y1, columns=infer_columns(x, names), provenance="twins")
    ds.require_both_arms("twins loading")
    return ds


def load_acic(path, dgp_id: str) -> CausalDataset:
    """Load one ACIC scaling DGP: covariates joined with (counter)factuals."""
    root = Path(path)
    x_path = root / "x.csv"
    f_path = root / f"{dgp_id}.csv"
    cf_path = root / f"{dgp_id}_cf.csv"
    for needed in (x_path, f_path):
        if not needed.exists():
            raise DataFormatError(f"ACIC file not found: {needed}")

    x_header, x_data = _read_header_csv(x_path)
    if x_header[0].lower() != "sample_id":
        raise DataFormatError(f"{x_path.name}: first column must be sample_id")
    x_ids = x_data[:, 0].astype(np.int64)
    row_by_id = {int(i): k for k, i in enumerate(x_ids)}

    f_header, f_data = _read_header_csv(f_path)
    want = ["sample_id", "z", "y"]
    if [h.lower() for h in f_header] != want:
        raise DataFormatError(f"{f_path.name}: expected header {want}, got {f_header}")
    f_ids = f_data[:, 0].astype(np.int64)
    missing = [int(i) for i in f_ids if int(i) not in row_by_id]
    if missing:
        shown = ", ".join(str(i) for i in missing[:10])
        more = "" if len(missing) <= 10 else f" (+{len(missing) - 10} more)"
        raise JoinError(f"{dgp_id}: factual ids missing from x.csv: {shown}{more}")

    order = np.array([row_by_id[int(i)] for i in f_ids])
    x = x_data[order, 1:]
    names = x_header[1:]
    t, y = f_data[:, 1], f_data[:, 2]

    mu0 = mu1 = y_cf = None
    if cf_path.exists():
        cf_header, cf_data = _read_header_csv(cf_path)
        want_cf = ["sample_id", "y0", "y1"]
        if [h.lower() for h in cf_header] != want_cf:
            raise DataFormatError(f"{cf_path.name}: expected header {want_cf}, got {cf_header}")
        cf_by_id = {int(i): k for k, i in enumerate(cf_data[:, 0].astype(np.int64))}
        missing_cf = [int(i) for i in f_ids if int(i) not in cf_by_id]
        if missing_cf:
            shown = ", ".join(str(i) for i in missing_cf[:10])
            more = "" if len(missing_cf) <= 10 else f" (+{len(missing_cf) - 10} more)"
            raise JoinError(f"{dgp_id}: counterfactual ids missing: {shown}{more}")
        cf_order = np.array([cf_by_id[int(i)] for i in f_ids])
        mu0 = cf_data[cf_order, 1]
        mu1 = cf_data[cf_order, 2]
        y_cf = np.where(t == 1, mu0, mu1)

    ds = CausalDataset(x=x, t=t, y_factual=y, y_cf=y_cf, mu0=mu0, mu1=mu1,
                       columns=infer_columns(x, names), provenance="acic")
    ds.require_both_arms("ACIC loading")
    return ds


# ---------------------------------------------------------------------------
# Synthetic selection-bias generator

@dataclass(frozen=True)
class SynthConfig:
    """Generator settings for the selection-bias study.

    Control covariates come from N(0, C) and treated ones from N(mu*1, C)
    with a shared covariance C built from a random square matrix; both
    potential outcomes are linear in x with independent noise.
    """

    n_control: int = 5000
    n_treated: int = 2500
    dim: int = 10
    mu: float = 1.0
    covariance_seed: int = 0
    outcome_seed: int = 0
    psd_jitter: float = 1e-3

    def validate(self) -> None:
        if self.n_control <= 0 or self.n_treated <= 0:
            raise GenerationError("sample counts must be positive")
        if self.dim <= 0:
            raise GenerationError("dimension must be positive")
        if self.psd_jitter <= 0:
            raise GenerationError("psd_jitter must be positive")


class SyntheticData(NamedTuple):
    dataset: CausalDataset
    kl: float  # exact KL between treated and control covariate distributions


def mean_shift_kl(shift: np.ndarray, cov: np.ndarray) -> float:
    """KL(N(shift, cov) || N(0, cov)) = 0.5 * shift^T cov^{-1} shift."""
    shift = np.asarray(shift, dtype=np.float64).ravel()
    try:
        solved = np.linalg.solve(cov, shift)
    except np.linalg.LinAlgError as exc:
        raise GenerationError(f"covariance not invertible: {exc}") from None
    return float(0.5 * shift @ solved)


def _build_covariance(cfg: SynthConfig) -> np.ndarray:
    gen = np.random.default_rng(derive_stream("synth-cov", cfg.covariance_seed))
    raw = gen.uniform(-1.0, 1.0, size=(cfg.dim, cfg.dim))
    c = 0.5 * (raw + raw.T)
    # symmetrized uniform matrices are usually indefinite; clip eigenvalues
    vals, vecs = np.linalg.eigh(c)
    vals = np.maximum(vals, cfg.psd_jitter)
    c = (vecs * vals) @ vecs.T
    c = 0.5 * (c + c.T)
    if np.linalg.eigvalsh(c).min() <= 0:
        raise GenerationError("covariance repair failed to produce a positive matrix")
    return c


def generate_synthetic(cfg: SynthConfig, rng: RngStream) -> SyntheticData:
    """Draw one selection-bias dataset; bit-reproducible given (cfg, rng)."""
    cfg.validate()
    cov = _build_covariance(cfg)
    w_gen = np.random.default_rng(derive_stream("synth-w", cfg.outcome_seed))
    w = w_gen.uniform(-1.0, 1.0, size=(cfg.dim, 2))  # column 0: control, 1: treated

    chol = np.linalg.cholesky(cov)
    n = cfg.n_control + cfg.n_treated
    x = rng.normal((n, cfg.dim)) @ chol.T
    x[cfg.n_control:] += cfg.mu
    t = np.concatenate([np.zeros(cfg.n_control), np.ones(cfg.n_treated)])

    mu_both = x @ w                      # (n, 2) noiseless potential outcomes
    noise = rng.normal((n, 2)) * np.sqrt(0.1)
    y_both = mu_both + noise
    y_factual = np.where(t == 1, y_both[:, 1], y_both[:, 0])
    y_cf = np.where(t == 1, y_both[:, 0], y_both[:, 1])

    ds = CausalDataset(x=x, t=t, y_factual=y_factual, y_cf=y_cf,
                       mu0=mu_both[:, 0], mu1=mu_both[:, 1], provenance="synthetic")
    kl = mean_shift_kl(np.full(cfg.dim, cfg.mu), cov)
    return SyntheticData(dataset=ds, kl=kl)


def export_synthetic_csv(data: SyntheticData, cfg: SynthConfig, path) -> Path:
    """Write [t, y_factual, y_cf, mu0, mu1, x...] plus a JSON sidecar."""
    import json

    p = Path(path)
    ds = data.dataset
    table = np.column_stack([ds.t, ds.y_factual, ds.y_cf, ds.mu0, ds.mu1, ds.x])
    with open(p, "w", newline="") as fh:
        writer = csv.writer(fh)
        for row in table:
            writer.writerow([repr(float(v)) for v in row])
    meta = {
        "columns": ["t", "y_factual", "y_cf", "mu0", "mu1"]
        + [c.name for c in ds.columns],
        "mu": cfg.mu,
        "kl": data.kl,
        "n_control": cfg.n_control,
        "n_treated": cfg.n_treated,
        "dim": cfg.dim,
        "covariance_seed": cfg.covariance_seed,
        "outcome_seed": cfg.outcome_seed,
        "psd_jitter": cfg.psd_jitter,
        "true_ate": ds.true_ate,
    }
    sidecar = p.with_suffix(p.suffix + ".meta.json")
    sidecar.write_text(json.dumps(meta, indent=2, sort_keys=True))
    return sidecar


# ---------------------------------------------------------------------------
# Splitting and standardization

@dataclass(frozen=True)
class SplitSpec:
    """Train/validation/test fractions plus the replication seed."""

    fractions: tuple[float, float, float] = (0.63, 0.27, 0.10)
    seed: int = 0

    def validate(self) -> None:
        f = self.fractions
        if len(f) != 3 or any(not 0.0 < v < 1.0 for v in f):
            raise SplitError(f"fractions must each lie in (0,1), got {f}")
        if abs(sum(f) - 1.0) > 1e-9:
            raise SplitError(f"fractions must sum to 1, got {sum(f)}")


def split(dataset: CausalDataset, spec: SplitSpec):
    """Random (train, validation, test) partition, reproducible by seed."""
    spec.validate()
    n = dataset.n
    n_train = round(spec.fractions[0] * n)
    n_val = round(spec.fractions[1] * n)
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) < 1:
        raise SplitError(
            f"split of {n} subjects at {spec.fractions} leaves an empty part "
            f"({n_train}/{n_val}/{n_test})")
    perm = np.random.default_rng(derive_stream("split", spec.seed)).permutation(n)
    train = dataset.subset(perm[:n_train])
    val = dataset.subset(perm[n_train:n_train + n_val])
    test = dataset.subset(perm[n_train + n_val:])
    if not train.has_both_arms:
        raise SplitError(
            f"training split (seed {spec.seed}) lacks one treatment arm; reseed")
    return train, val, test


class ColumnScaler:
    """Per-column standardization fitted on a training split.

    Continuous columns get (x - mean) / std with the std floored at 1e-8;
    binary columns pass through untouched.
    """

    STD_FLOOR = 1e-8

    def __init__(self, mean, std, scale_mask):
        self.mean = np.asarray(mean, dtype=np.float64)
        self.std = np.asarray(std, dtype=np.float64)
        self.scale_mask = np.asarray(scale_mask, dtype=bool)

    @classmethod
    def fit(cls, x: np.ndarray, columns: list[ColumnInfo]) -> "ColumnScaler":
        mask = np.array([c.kind == "continuous" for c in columns])
        mean = np.where(mask, x.mean(axis=0), 0.0)
        std = np.where(mask, np.maximum(x.std(axis=0), cls.STD_FLOOR), 1.0)
        return cls(mean, std, mask)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.std

    def inverse(self, x: np.ndarray) -> np.ndarray:
        return x * self.std + self.mean

    def to_dict(self) -> dict:
        return {"mean": self.mean.tolist(), "std": self.std.tolist(),
                "scale_mask": self.scale_mask.astype(int).tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "ColumnScaler":
        return cls(d["mean"], d["std"], np.array(d["scale_mask"], dtype=bool))


def standardize(train: CausalDataset, *others: CausalDataset):
    """Scale continuous covariate columns by train-split statistics.

    Returns the transformed datasets (train first) followed by the fitted
    scaler, which supports the inverse transform.
    """
    if train.n == 0:
        raise DataFormatError("cannot standardize an empty training set")
    scaler = ColumnScaler.fit(train.x, train.columns)
    out = []
    for ds in (train, *others):
        out.append(replace(ds, x=scaler.transform(ds.x)))
    return (*out, scaler)
