"""Benchmark-format fixture files for the test suite.

Real IHDP/twins/ACIC files cannot be fetched in CI, so these writers emit
files in the exact documented layouts, generated with the same semi-synthetic
recipes the benchmarks use (nonlinear exponential control surface with a
constant-shifted linear treated surface for IHDP; paired binary mortality
outcomes for twins; id-joined factual/counterfactual tables for ACIC).
Covariates and treatment assignment are fixed across IHDP replicate files;
only the response surfaces and noise are redrawn per file.
"""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

IHDP_N = 747
IHDP_N_TREATED = 139
IHDP_D_CONT = 6
IHDP_D_BIN = 19


def _ihdp_population(base_seed: int = 20240501):
    gen = np.random.default_rng(base_seed)
    # mildly correlated continuous block
    shared = gen.normal(size=(IHDP_N, 3))
    loadings = gen.normal(size=(3, IHDP_D_CONT)) * 0.4
    x_cont = shared @ loadings + gen.normal(size=(IHDP_N, IHDP_D_CONT))
    x_cont = (x_cont - x_cont.mean(0)) / x_cont.std(0)
    rates = gen.uniform(0.15, 0.85, size=IHDP_D_BIN)
    x_bin = (gen.uniform(size=(IHDP_N, IHDP_D_BIN)) < rates).astype(float)
    x = np.column_stack([x_cont, x_bin])

    # confounded but overlapping assignment with a fixed treated count:
    # Gumbel-top-k over logits samples without replacement by propensity
    w = gen.normal(size=x.shape[1]) * (gen.uniform(size=x.shape[1]) < 0.4)
    score = x @ w
    logits = 0.3 * (score - score.mean()) / score.std()
    gumbel = -np.log(-np.log(gen.uniform(size=IHDP_N)))
    t = np.zeros(IHDP_N)
    t[np.argsort(logits + gumbel)[-IHDP_N_TREATED:]] = 1.0
    return x, t


# log-scale location/spread of the curved control surface and the extra
# linear heterogeneity of the treated surface, held fixed across files so
# replicate difficulty stays comparable
IHDP_SURFACE_LOC = 1.9
IHDP_SURFACE_SCALE = 0.65
IHDP_TREATED_LINEAR = 2.5


def _ihdp_surfaces(x, t, file_index: int):
    gen = np.random.default_rng(77_000 + file_index)
    beta = gen.choice([0.0, 0.1, 0.2, 0.3, 0.4], size=x.shape[1],
                      p=[0.6, 0.1, 0.1, 0.1, 0.1])
    beta_lin = gen.choice([0.0, 0.1, 0.2, 0.3, 0.4], size=x.shape[1],
                          p=[0.6, 0.1, 0.1, 0.1, 0.1])
    idx = x @ beta
    idx_lin = x @ beta_lin
    if idx.std() < 1e-9 or idx_lin.std() < 1e-9:  # all-zero draw; retry
        return _ihdp_surfaces(x, t, file_index + 90_000)
    norm_idx = np.clip((idx - idx.mean()) / idx.std(), -2.5, 2.5)
    mu0 = np.exp(IHDP_SURFACE_LOC + IHDP_SURFACE_SCALE * norm_idx)
    # orthogonalize the extra treated-surface direction against the curved
    # index so the added effect heterogeneity does not cancel against mu0
    lin = idx_lin - idx_lin.mean() - norm_idx * (idx_lin @ norm_idx) / len(idx)
    if lin.std() < 1e-9:
        return _ihdp_surfaces(x, t, file_index + 90_000)
    mu1_raw = idx + IHDP_TREATED_LINEAR * lin / lin.std()
    omega = (mu1_raw - mu0)[t == 1].mean() - 4.0  # treated-group effect pinned at 4
    mu1 = mu1_raw - omega
    y0 = mu0 + gen.normal(size=len(t))
    y1 = mu1 + gen.normal(size=len(t))
    return mu0, mu1, y0, y1


def write_ihdp_files(directory, file_indices, base_seed: int = 20240501) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    x, t = _ihdp_population(base_seed)
    for idx in file_indices:
        mu0, mu1, y0, y1 = _ihdp_surfaces(x, t, idx)
        yf = np.where(t == 1, y1, y0)
        ycf = np.where(t == 1, y0, y1)
        table = np.column_stack([t, yf, ycf, mu0, mu1, x])
        with open(directory / f"ihdp_npci_{idx}.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in table:
                writer.writerow([repr(float(v)) for v in row])
    return directory


TWINS_N = 11399
TWINS_D_CONT = 10
TWINS_D_BIN = 20


def write_twins_file(directory, seed: int = 31) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(seed)
    x_cont = gen.normal(size=(TWINS_N, TWINS_D_CONT))
    x_bin = (gen.uniform(size=(TWINS_N, TWINS_D_BIN))
             < gen.uniform(0.1, 0.9, size=TWINS_D_BIN)).astype(float)
    x = np.column_stack([x_cont, x_bin])

    risk = x @ (gen.normal(size=x.shape[1]) * 0.25)
    p0 = _sigmoid(risk - 2.4)                 # lighter-twin mortality, low base rate
    p1 = _sigmoid(risk - 2.4 - 0.35)          # heavier twin fares slightly better
    y0 = (gen.uniform(size=TWINS_N) < p0).astype(float)
    y1 = (gen.uniform(size=TWINS_N) < p1).astype(float)

    # observation of the heavier twin depends weakly on covariates
    sel = _sigmoid(x @ (gen.normal(size=x.shape[1]) * 0.1) + gen.normal(size=TWINS_N) * 0.2)
    t = (gen.uniform(size=TWINS_N) < sel).astype(float)

    wt0 = gen.normal(1600.0, 250.0, size=TWINS_N)
    wt1 = wt0 + np.abs(gen.normal(180.0, 90.0, size=TWINS_N))

    path = directory / "twins.csv"
    names = [f"x{j + 1}" for j in range(x.shape[1])]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "y0", "y1", "wt0", "wt1"] + names)
        for i in range(TWINS_N):
            writer.writerow([int(t[i]), int(y0[i]), int(y1[i]),
                             repr(float(wt0[i])), repr(float(wt1[i]))] + [repr(float(v)) for v in x[i]])
    return path


def _sigmoid(v):
    return 1.0 / (1.0 + np.exp(-v))


def write_acic_dgp(directory, dgp_id: str = "dgp_a", n: int = 1500, seed: int = 7,
                   with_cf: bool = True) -> Path:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    gen = np.random.default_rng(seed)
    d = 12
    ids = np.arange(1, n + 1)
    x = gen.normal(size=(n, d))
    x[:, d // 2:] = (x[:, d // 2:] > 0).astype(float)

    with open(directory / "x.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id"] + [f"v{j + 1}" for j in range(d)])
        for i in range(n):
            writer.writerow([ids[i]] + [repr(float(v)) for v in x[i]])

    beta = gen.normal(size=d) * 0.5
    tau = 1.5 + x @ (gen.normal(size=d) * 0.3)
    mu0 = x @ beta + 0.5 * np.tanh(x[:, 0] * x[:, 1])
    mu1 = mu0 + tau
    t = (gen.uniform(size=n) < _sigmoid(x @ (gen.normal(size=d) * 0.3))).astype(float)
    y0 = mu0 + gen.normal(size=n) * 0.3
    y1 = mu1 + gen.normal(size=n) * 0.3
    y = np.where(t == 1, y1, y0)

    with open(directory / f"{dgp_id}.csv", "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["sample_id", "z", "y"])
        for i in range(n):
            writer.writerow([ids[i], int(t[i]), repr(float(y[i]))])

    if with_cf:
        with open(directory / f"{dgp_id}_cf.csv", "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["sample_id", "y0", "y1"])
            for i in range(n):
                writer.writerow([ids[i], repr(float(y0[i])), repr(float(y1[i]))])
    return directory


def make_linear_toy(n: int = 500, d: int = 4, effect: float = 2.0, seed: int = 0,
                    margin: float = 0.3, deterministic_treatment: bool = True):
    """Noiseless y = w.x + effect * t with a margin-separated assignment rule.

    The margin keeps the assignment boundary learnable so a treatment head
    can drive its residual to ~0 on this data.
    """
    from cevib.datasets import CausalDataset

    gen = np.random.default_rng(seed)
    w = gen.normal(size=d)
    v = gen.normal(size=d)
    v /= np.linalg.norm(v)
    rows = []
    while len(rows) < n:
        cand = gen.normal(size=(n, d))
        keep = np.abs(cand @ v) > margin if deterministic_treatment else np.ones(n, bool)
        rows.extend(cand[keep])
    x = np.array(rows[:n])
    if deterministic_treatment:
        t = (x @ v > 0).astype(float)
    else:
        t = (gen.uniform(size=n) < 0.5).astype(float)
    mu0 = x @ w
    mu1 = mu0 + effect
    y = np.where(t == 1, mu1, mu0)
    return CausalDataset(x=x, t=t, y_factual=y, y_cf=np.where(t == 1, mu0, mu1),
                         mu0=mu0, mu1=mu1, provenance="toy")
