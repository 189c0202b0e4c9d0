"""The variational-bottleneck causal model and its training objective.

An encoder maps covariates to a diagonal-Gaussian posterior over K latent
confounders; a sample z = mu + sigma * eps feeds two outcome heads (one per
treatment arm) and a treatment head.  Training maximizes

    L1 - beta * KL(posterior || N(0, I))

where L1 is the squared-error log-likelihood surrogate of outcomes and
treatment, averaged over subjects and over M reparameterized draws.  The
code minimizes ``-L1 + beta * KL``.

Covariates (continuous columns) and continuous outcomes are standardized
with training-split statistics held inside the model; predictions are always
returned in original outcome units.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .datasets import CausalDataset, ColumnScaler
from .errors import (
    ConfigError,
    NotFittedError,
    NotInitializedError,
    PositivityError,
    ShapeError,
    TrainingError,
)
from .nn import AdamState, Mlp, adam_step, mlp_backward, mlp_forward, sigmoid, softplus
from .rng import RngStream

__all__ = [
    "CevibConfig",
    "LatentPosterior",
    "OutcomeScaler",
    "TrainingTrace",
    "Batch",
    "CevibModel",
    "sample_latent",
    "loss_l1",
    "loss_kl",
    "total_objective",
]

CHECKPOINT_VERSION = 1


@dataclass(frozen=True)
class CevibConfig:
    latent_dim: int = 20
    encoder_hidden: tuple[int, ...] = (200, 200)
    head_hidden: tuple[int, ...] = (100, 100)
    beta: float = 1e-3
    mc_samples_train: int = 1
    mc_samples_eval: int = 100
    learning_rate: float = 1e-3
    epochs: int = 300
    batch_size: int = 64
    early_stop_patience: int = 20
    sigma_floor: float = 1e-6

    def __post_init__(self):
        object.__setattr__(self, "encoder_hidden", tuple(self.encoder_hidden))
        object.__setattr__(self, "head_hidden", tuple(self.head_hidden))
        if self.latent_dim < 1:
            raise ConfigError("latent_dim must be >= 1")
        if self.mc_samples_train < 1 or self.mc_samples_eval < 1:
            raise ConfigError("Monte-Carlo sample counts must be >= 1")
        if self.beta < 0:
            raise ConfigError("beta must be nonnegative")
        if self.sigma_floor <= 0:
            raise ConfigError("sigma_floor must be positive")
        if self.epochs < 1 or self.batch_size < 1 or self.early_stop_patience < 0:
            raise ConfigError("epochs and batch_size must be >= 1, patience >= 0")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["encoder_hidden"] = list(self.encoder_hidden)
        d["head_hidden"] = list(self.head_hidden)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "CevibConfig":
        return cls(**d)


@dataclass
class LatentPosterior:
    """Per-subject diagonal Gaussian over the latent confounders."""

    mu: np.ndarray     # (n, K)
    sigma: np.ndarray  # (n, K), standard deviations

    def __post_init__(self):
        if self.mu.shape != self.sigma.shape:
            raise ShapeError(
                f"mu shape {self.mu.shape} does not match sigma shape {self.sigma.shape}")


class OutcomeScaler:
    """Scalar standardization of a continuous outcome."""

    def __init__(self, mean: float, std: float):
        self.mean = float(mean)
        self.std = max(float(std), 1e-8)

    @classmethod
    def fit(cls, y: np.ndarray) -> "OutcomeScaler":
        return cls(y.mean(), y.std())

    def transform(self, y):
        return (np.asarray(y, dtype=np.float64) - self.mean) / self.std

    def inverse(self, y):
        return np.asarray(y, dtype=np.float64) * self.std + self.mean

    def to_dict(self):
        return {"mean": self.mean, "std": self.std}

    @classmethod
    def from_dict(cls, d):
        return cls(d["mean"], d["std"])


@dataclass
class TrainingTrace:
    train_total: list[float] = field(default_factory=list)
    val_total: list[float] = field(default_factory=list)
    val_neg_l1: list[float] = field(default_factory=list)
    val_kl: list[float] = field(default_factory=list)  # raw mean KL, beta excluded
    best_epoch: int = -1

    @property
    def n_epochs(self) -> int:
        return len(self.train_total)


class Batch(NamedTuple):
    x: np.ndarray
    t: np.ndarray
    y: np.ndarray
    eps: np.ndarray  # (M, n, K) reparameterization draws


def sample_latent(post: LatentPosterior, eps: np.ndarray) -> np.ndarray:
    """Reparameterized draw z = mu + sigma * eps (elementwise)."""
    eps = np.asarray(eps, dtype=np.float64)
    if eps.shape[-2:] != post.mu.shape:
        raise ShapeError(
            f"eps shape {eps.shape} does not match posterior shape {post.mu.shape}")
    return post.mu + post.sigma * eps


def loss_kl(post: LatentPosterior, beta: float) -> float:
    """(beta/N) sum_n KL(N(mu_n, diag sigma_n^2) || N(0, I)), closed form."""
    kl_n = 0.5 * np.sum(post.sigma ** 2 + post.mu ** 2 - 1.0
                        - 2.0 * np.log(post.sigma), axis=1)
    return float(beta * kl_n.mean())


def _as_eps_3d(eps, n, k) -> np.ndarray:
    eps = np.asarray(eps, dtype=np.float64)
    if eps.ndim == 2:
        eps = eps[None]
    if eps.ndim != 3 or eps.shape[1:] != (n, k):
        raise ShapeError(f"eps shape {eps.shape} incompatible with ({n}, {k}) posterior")
    return eps


def _check_treatment(t) -> np.ndarray:
    t = np.asarray(t, dtype=np.float64).ravel()
    if not np.isin(t, (0.0, 1.0)).all():
        bad = t[~np.isin(t, (0.0, 1.0))][0]
        raise ValueError(f"non-binary treatment value {bad!r}")
    return t


def loss_l1(model: "CevibModel", x, t, y, eps_samples) -> float:
    """Monte-Carlo likelihood term; always <= 0, and 0 only for perfect heads."""
    t = _check_treatment(t)
    xs, ys = model._scale_inputs(x, y)
    pred, _ = model._losses(xs, t, ys, _as_eps_3d(eps_samples, xs.shape[0],
                                                  model.config.latent_dim))
    return -pred


def total_objective(model: "CevibModel", batch: Batch) -> float:
    """Loss minimized during training: -L1 + beta * mean KL."""
    if len(batch.t) == 0:
        raise ValueError("batch is empty")
    t = _check_treatment(batch.t)
    xs, ys = model._scale_inputs(batch.x, batch.y)
    eps = _as_eps_3d(batch.eps, xs.shape[0], model.config.latent_dim)
    pred, kl_raw = model._losses(xs, t, ys, eps)
    return pred + model.config.beta * kl_raw


class CevibModel:
    """Encoder + two outcome heads + treatment head with shared latent input."""

    def __init__(self, config: CevibConfig | None = None):
        self.config = config or CevibConfig()
        self.encoder: Mlp | None = None
        self.head_y0: Mlp | None = None
        self.head_y1: Mlp | None = None
        self.head_t: Mlp | None = None
        self.x_scaler: ColumnScaler | None = None
        self.y_scaler: OutcomeScaler | None = None
        self.n_features: int | None = None
        self.fitted = False

    # -- construction -------------------------------------------------------

    def initialize(self, n_features: int, rng: RngStream | None = None) -> "CevibModel":
        """Build parameter arrays for covariate dimension ``n_features``."""
        cfg = self.config
        k = cfg.latent_dim
        self.encoder = Mlp.build([n_features, *cfg.encoder_hidden, 2 * k], rng=rng)
        self.head_y0 = Mlp.build([k, *cfg.head_hidden, 1], rng=rng)
        self.head_y1 = Mlp.build([k, *cfg.head_hidden, 1], rng=rng)
        self.head_t = Mlp.build([k, *cfg.head_hidden, 1],
                                output_activation="sigmoid", rng=rng)
        self.n_features = n_features
        return self

    def _require_nets(self):
        if self.encoder is None:
            raise NotInitializedError("model parameters are not initialized")

    def _require_fitted(self):
        if not self.fitted:
            raise NotFittedError("model is not fitted")

    @property
    def nets(self) -> list[tuple[str, Mlp]]:
        self._require_nets()
        return [("encoder", self.encoder), ("head_y0", self.head_y0),
                ("head_y1", self.head_y1), ("head_t", self.head_t)]

    # -- parameter vector ----------------------------------------------------

    def get_params(self) -> np.ndarray:
        parts = []
        for _, net in self.nets:
            for layer in net.layers:
                parts.append(layer.W.ravel())
                parts.append(layer.b)
        return np.concatenate(parts)

    def set_params(self, vec: np.ndarray) -> None:
        pos = 0
        for _, net in self.nets:
            for layer in net.layers:
                n = layer.W.size
                layer.W = vec[pos:pos + n].reshape(layer.W.shape).copy()
                pos += n
                layer.b = vec[pos:pos + layer.b.size].copy()
                pos += layer.b.size
        if pos != vec.size:
            raise ShapeError(f"parameter vector has {vec.size} entries, expected {pos}")

    def param_layout(self) -> list[tuple[str, int, int]]:
        layout, pos = [], 0
        for name, net in self.nets:
            for i, layer in enumerate(net.layers):
                layout.append((f"{name}.L{i}.W", pos, pos + layer.W.size))
                pos += layer.W.size
                layout.append((f"{name}.L{i}.b", pos, pos + layer.b.size))
                pos += layer.b.size
        return layout

    # -- inference pieces ----------------------------------------------------

    def _scale_inputs(self, x, y=None):
        x = np.asarray(x, dtype=np.float64)
        xs = self.x_scaler.transform(x) if self.x_scaler is not None else x
        if y is None:
            return xs, None
        y = np.asarray(y, dtype=np.float64).ravel()
        ys = self.y_scaler.transform(y) if self.y_scaler is not None else y
        return xs, ys

    def _encode_scaled(self, xs: np.ndarray):
        """Posterior from already-standardized covariates."""
        self._require_nets()
        if xs.shape[1] != self.encoder.in_dim:
            raise ShapeError(
                f"input has {xs.shape[1]} features but encoder expects {self.encoder.in_dim}")
        k = self.config.latent_dim
        raw = mlp_forward(self.encoder, xs)
        mu = raw[:, :k]
        pre = raw[:, k:]
        sigma = softplus(pre) + self.config.sigma_floor
        return mu, sigma, pre

    def encode(self, x) -> LatentPosterior:
        """Posterior over latent confounders for original-unit covariates."""
        xs, _ = self._scale_inputs(x)
        mu, sigma, _ = self._encode_scaled(xs)
        return LatentPosterior(mu=mu, sigma=sigma)

    def outcome_means_from_latent(self, z: np.ndarray):
        """Original-unit outcome means (y0_hat, y1_hat) for latent draws z."""
        self._require_nets()
        y0 = mlp_forward(self.head_y0, z)[:, 0]
        y1 = mlp_forward(self.head_y1, z)[:, 0]
        if self.y_scaler is not None:
            y0 = self.y_scaler.inverse(y0)
            y1 = self.y_scaler.inverse(y1)
        return y0, y1

    def propensity_from_latent(self, z: np.ndarray) -> np.ndarray:
        self._require_nets()
        return mlp_forward(self.head_t, z)[:, 0]

    def predict_heads(self, x, t, eps):
        """(outcome prediction in original units, treatment propensity)."""
        self._require_fitted()
        t = _check_treatment(t)
        post = self.encode(x)
        z = sample_latent(post, np.asarray(eps, dtype=np.float64))
        y0, y1 = self.outcome_means_from_latent(z)
        return np.where(t == 1, y1, y0), self.propensity_from_latent(z)

    # -- loss and gradients ----------------------------------------------------

    def _losses(self, xs, t, ys, eps):
        """(-L1, raw mean KL) on standardized data; eps is (M, n, K)."""
        mu, sigma, _ = self._encode_scaled(xs)
        m, n, k = eps.shape
        z = (mu[None] + sigma[None] * eps).reshape(m * n, k)
        a0 = mlp_forward(self.head_y0, z).reshape(m, n)
        a1 = mlp_forward(self.head_y1, z).reshape(m, n)
        p = mlp_forward(self.head_t, z).reshape(m, n)
        resid = (t[None] * (ys[None] - a1) ** 2
                 + (1.0 - t[None]) * (ys[None] - a0) ** 2
                 + (t[None] - p) ** 2)
        pred = float(resid.mean(axis=0).mean())
        kl_raw = 0.5 * np.sum(sigma ** 2 + mu ** 2 - 1.0 - 2.0 * np.log(sigma), axis=1)
        return pred, float(kl_raw.mean())

    def _loss_and_grads(self, xs, t, ys, eps):
        """Total objective and its exact gradient as a flat vector."""
        beta = self.config.beta
        mu, sigma, pre = self._encode_scaled(xs)
        m, n, k = eps.shape
        z = (mu[None] + sigma[None] * eps).reshape(m * n, k)

        a0 = mlp_forward(self.head_y0, z).reshape(m, n)
        a1 = mlp_forward(self.head_y1, z).reshape(m, n)
        p = mlp_forward(self.head_t, z).reshape(m, n)

        r1 = a1 - ys[None]
        r0 = a0 - ys[None]
        rt = p - t[None]
        pred = float((t[None] * r1 ** 2 + (1 - t[None]) * r0 ** 2 + rt ** 2)
                     .mean(axis=0).mean())
        kl_raw_n = 0.5 * np.sum(sigma ** 2 + mu ** 2 - 1.0 - 2.0 * np.log(sigma), axis=1)
        total = pred + beta * float(kl_raw_n.mean())

        c = 1.0 / (m * n)
        d_a1 = (2.0 * c) * t[None] * r1
        d_a0 = (2.0 * c) * (1 - t[None]) * r0
        d_p = (2.0 * c) * rt

        g1_grads, dz1 = mlp_backward(self.head_y1, z, d_a1.reshape(-1, 1))
        g0_grads, dz0 = mlp_backward(self.head_y0, z, d_a0.reshape(-1, 1))
        gt_grads, dzt = mlp_backward(self.head_t, z, d_p.reshape(-1, 1))
        dz = (dz1 + dz0 + dzt).reshape(m, n, k)

        d_mu = dz.sum(axis=0) + (beta / n) * mu
        d_sigma = (dz * eps).sum(axis=0) + (beta / n) * (sigma - 1.0 / sigma)
        d_pre = d_sigma * sigmoid(pre)  # softplus'
        enc_grads, _ = mlp_backward(self.encoder, xs, np.hstack([d_mu, d_pre]))

        flat = []
        for grads in (enc_grads, g0_grads, g1_grads, gt_grads):
            for dw, db in grads:
                flat.append(dw.ravel())
                flat.append(db)
        return total, np.concatenate(flat)

    def objective_and_gradient(self, x, t, y, eps):
        """Public gradient entry point; applies the model's scalers."""
        t = _check_treatment(t)
        xs, ys = self._scale_inputs(x, y)
        eps = _as_eps_3d(eps, xs.shape[0], self.config.latent_dim)
        return self._loss_and_grads(xs, t, ys, eps)

    # -- training ----------------------------------------------------------------

    def fit(self, train: CausalDataset, val: CausalDataset, rng: RngStream) -> TrainingTrace:
        """Adam training with early stopping on the validation objective."""
        cfg = self.config
        if train.d != val.d:
            raise ShapeError(
                f"train has {train.d} covariates but validation has {val.d}")
        train.require_both_arms("fitting")

        self.x_scaler = ColumnScaler.fit(train.x, train.columns)
        self.y_scaler = None if train.binary_outcome else OutcomeScaler.fit(train.y_factual)
        self.initialize(train.d, rng.child("init"))

        xs_tr, ys_tr = self._scale_inputs(train.x, train.y_factual)
        xs_va, ys_va = self._scale_inputs(val.x, val.y_factual)
        t_tr = _check_treatment(train.t)
        t_va = _check_treatment(val.t)

        k = cfg.latent_dim
        eps_rng = rng.child("train-eps")
        shuffle_rng = rng.child("shuffle")
        eps_val = rng.child("val-eps").normal((cfg.mc_samples_train, val.n, k))

        params = self.get_params()
        adam = AdamState.init(params.size, cfg.learning_rate, layout=self.param_layout())
        trace = TrainingTrace()
        best_val = np.inf
        best_params = params.copy()
        stall = 0

        n = train.n
        for epoch in range(cfg.epochs):
            order = shuffle_rng.permutation(n)
            batch_losses = []
            for start in range(0, n, cfg.batch_size):
                idx = order[start:start + cfg.batch_size]
                eps = eps_rng.normal((cfg.mc_samples_train, idx.size, k))
                try:
                    loss, grad = self._loss_and_grads(xs_tr[idx], t_tr[idx], ys_tr[idx], eps)
                except ShapeError as exc:
                    # non-finite activations trip the matrix-finiteness contract
                    raise TrainingError(
                        f"training diverged at epoch {epoch}, batch offset {start}: {exc}"
                    ) from None
                if not np.isfinite(loss):
                    raise TrainingError(
                        f"objective diverged at epoch {epoch}, batch offset {start}")
                params = adam_step(adam, params, grad)
                self.set_params(params)
                batch_losses.append(loss)

            val_pred, val_kl = self._losses(xs_va, t_va, ys_va, eps_val)
            val_total = val_pred + cfg.beta * val_kl
            if not np.isfinite(val_total):
                raise TrainingError(f"validation objective diverged at epoch {epoch}")
            trace.train_total.append(float(np.mean(batch_losses)))
            trace.val_total.append(val_total)
            trace.val_neg_l1.append(val_pred)
            trace.val_kl.append(val_kl)

            if val_total < best_val:
                best_val = val_total
                best_params = params.copy()
                trace.best_epoch = epoch
                stall = 0
            else:
                stall += 1
                if stall >= cfg.early_stop_patience:
                    break

        self.set_params(best_params)
        self.fitted = True
        return trace

    # -- persistence ----------------------------------------------------------------

    def save(self, path) -> Path:
        """Checkpoint to a flat npz with a JSON metadata record."""
        self._require_nets()
        path = Path(path)
        arrays = {}
        specs = {}
        for name, net in self.nets:
            specs[name] = [(l.W.shape[0], l.W.shape[1], l.activation) for l in net.layers]
            for i, layer in enumerate(net.layers):
                arrays[f"{name}.L{i}.W"] = layer.W
                arrays[f"{name}.L{i}.b"] = layer.b
        meta = {
            "version": CHECKPOINT_VERSION,
            "config": self.config.to_dict(),
            "layers": specs,
            "n_features": self.n_features,
            "fitted": self.fitted,
            "x_scaler": self.x_scaler.to_dict() if self.x_scaler else None,
            "y_scaler": self.y_scaler.to_dict() if self.y_scaler else None,
        }
        arrays["meta"] = np.frombuffer(json.dumps(meta, sort_keys=True).encode(), dtype=np.uint8)
        np.savez(path, **arrays)
        return path if path.suffix == ".npz" else path.with_suffix(path.suffix + ".npz")

    @classmethod
    def load(cls, path) -> "CevibModel":
        with np.load(path) as data:
            meta = json.loads(bytes(data["meta"]).decode())
            if meta["version"] != CHECKPOINT_VERSION:
                raise ConfigError(
                    f"checkpoint version {meta['version']} unsupported "
                    f"(expected {CHECKPOINT_VERSION})")
            model = cls(CevibConfig.from_dict(meta["config"]))
            model.n_features = meta["n_features"]
            model.fitted = meta["fitted"]
            if meta["x_scaler"]:
                model.x_scaler = ColumnScaler.from_dict(meta["x_scaler"])
            if meta["y_scaler"]:
                model.y_scaler = OutcomeScaler.from_dict(meta["y_scaler"])
            from .nn import Layer

            for attr, name in (("encoder", "encoder"), ("head_y0", "head_y0"),
                               ("head_y1", "head_y1"), ("head_t", "head_t")):
                layers = []
                for i, (_, _, act) in enumerate(meta["layers"][name]):
                    layers.append(Layer(W=data[f"{name}.L{i}.W"].copy(),
                                        b=data[f"{name}.L{i}.b"].copy(),
                                        activation=act))
                setattr(model, attr, Mlp(layers))
        return model
