import numpy as np
import pytest

from cevib.baselines import fit_ols, ols_ite
from cevib.datasets import CausalDataset, SynthConfig, generate_synthetic
from cevib.errors import NotFittedError, PositivityError
from cevib.metrics import eps_ate
from cevib.rng import RngStream
from datagen import make_linear_toy


def _noiseless_1d(n=200, seed=0):
    gen = np.random.default_rng(seed)
    x = gen.normal(size=(n, 1))
    t = (gen.uniform(size=n) < 0.5).astype(float)
    y = 3.0 + 2.0 * x[:, 0] + 5.0 * t
    return CausalDataset(x=x, t=t, y_factual=y)


def test_ols1_recovers_exact_coefficients():
    ds = _noiseless_1d()
    model = fit_ols("ols1", ds)
    np.testing.assert_allclose(model.coef, [3.0, 2.0, 5.0], atol=1e-8)


def test_ols2_recovers_per_arm_coefficients():
    gen = np.random.default_rng(1)
    x = gen.normal(size=(300, 3))
    t = (gen.uniform(size=300) < 0.5).astype(float)
    y = np.where(t == 1, 1.0 + x @ [1.0, -2.0, 0.5], -3.0 + x @ [0.2, 0.0, 4.0])
    ds = CausalDataset(x=x, t=t, y_factual=y)
    model = fit_ols("ols2", ds)
    np.testing.assert_allclose(model.coef1, [1.0, 1.0, -2.0, 0.5], atol=1e-8)
    np.testing.assert_allclose(model.coef0, [-3.0, 0.2, 0.0, 4.0], atol=1e-8)


def test_duplicated_rows_leave_coefficients_unchanged():
    ds = _noiseless_1d(n=80, seed=2)
    doubled = CausalDataset(x=np.vstack([ds.x, ds.x]), t=np.concatenate([ds.t, ds.t]),
                            y_factual=np.concatenate([ds.y_factual, ds.y_factual]))
    a = fit_ols("ols1", ds)
    b = fit_ols("ols1", doubled)
    np.testing.assert_allclose(a.coef, b.coef, atol=1e-8)


def test_ols2_empty_arm_raises_positivity():
    ds = _noiseless_1d()
    all_control = CausalDataset(x=ds.x, t=np.zeros(ds.n), y_factual=ds.y_factual)
    with pytest.raises(PositivityError, match="t=1"):
        fit_ols("ols2", all_control)


def test_ols1_ite_is_constant():
    ds = _noiseless_1d(seed=3)
    model = fit_ols("ols1", ds)
    ite = ols_ite(model, ds.x)
    assert np.unique(ite).size == 1
    assert ite[0] == pytest.approx(5.0, abs=1e-8)


def test_ols2_ite_on_constant_effect_toy():
    ds = make_linear_toy(n=400, d=5, effect=2.0, seed=4, deterministic_treatment=False)
    model = fit_ols("ols2", ds)
    ite = ols_ite(model, ds.x)
    np.testing.assert_allclose(ite, 2.0, atol=1e-8)


def test_ols2_identical_arms_give_zero_ite():
    model = fit_ols("ols2", _noiseless_1d(seed=5))
    model.coef0 = model.coef1.copy()
    np.testing.assert_array_equal(ols_ite(model, np.random.default_rng(0).normal(size=(10, 1))),
                                  np.zeros(10))


def test_unfitted_model_raises():
    from cevib.baselines import OlsModel

    with pytest.raises(NotFittedError):
        ols_ite(OlsModel(variant="ols1"), np.zeros((2, 1)))


def test_unknown_variant_rejected():
    with pytest.raises(ValueError):
        fit_ols("ols3", _noiseless_1d())


def test_ols2_ate_error_vanishes_on_unbiased_synthetic_data():
    # no covariate shift, linear truth with noise std sqrt(0.1):
    # ols2's ATE error should be far below 0.05 at N=7500
    errs = []
    for seed in range(10):
        cfg = SynthConfig(mu=0.0, covariance_seed=seed, outcome_seed=seed)
        ds = generate_synthetic(cfg, RngStream(seed)).dataset
        model = fit_ols("ols2", ds)
        errs.append(eps_ate(ds.ite_true, ols_ite(model, ds.x)))
    assert np.mean(errs) < 0.05


def test_ols1_ate_error_equals_coefficient_gap():
    ds = _noiseless_1d(seed=6)
    noisy = CausalDataset(x=ds.x, t=ds.t,
                          y_factual=ds.y_factual + np.random.default_rng(7).normal(size=ds.n),
                          mu0=3.0 + 2.0 * ds.x[:, 0], mu1=8.0 + 2.0 * ds.x[:, 0])
    model = fit_ols("ols1", noisy)
    err = eps_ate(noisy.ite_true, ols_ite(model, noisy.x))
    assert err == pytest.approx(abs(noisy.true_ate - model.coef[-1]), abs=1e-12)
