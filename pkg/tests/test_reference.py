"""Cleartext oracles: closed forms, spectral bounds, and float trajectories."""

import math

import numpy as np
import pytest

from elsq import reference
from elsq.depth import CD, GD, GD_VWT, NAG, FitPlan
from elsq.engine import ridge_augment


def random_instance(seed, n=100, p=5):
    rng = np.random.default_rng(seed)
    X = rng.normal(size=(n, p))
    y = rng.normal(size=n)
    return X, y


def test_ols_identity_design():
    y = np.array([3.0, -1.0, 2.0])
    assert np.allclose(reference.ols_closed_form(np.eye(3), y), y)


def test_ols_exact_fit_one_column():
    X = np.array([[1.0], [2.0], [3.0]])
    y = np.array([2.0, 4.0, 6.0])
    assert np.allclose(reference.ols_closed_form(X, y), [2.0])


def test_ols_residual_orthogonality():
    X, y = random_instance(1)
    beta = reference.ols_closed_form(X, y)
    assert np.linalg.norm(X.T @ (y - X @ beta)) < 1e-8


def test_ols_rejects_rank_deficiency():
    X = np.ones((5, 2))  # duplicated column
    with pytest.raises(np.linalg.LinAlgError):
        reference.ols_closed_form(X, np.ones(5))


def test_ridge_reduces_to_ols_at_zero():
    X, y = random_instance(2)
    assert np.allclose(
        reference.ridge_closed_form(X, y, 0.0), reference.ols_closed_form(X, y)
    )


def test_ridge_shrinks_to_zero():
    X, y = random_instance(3)
    big = reference.ridge_closed_form(X, y, 1e12)
    assert np.linalg.norm(big) < 1e-6


def test_ridge_equals_ols_on_augmented_data():
    X, y = random_instance(4)
    for alpha in (0.5, 3.0, 17.0):
        X_aug, y_aug = ridge_augment(X, y, alpha)
        direct = reference.ridge_closed_form(X, y, alpha)
        via_aug = reference.ols_closed_form(X_aug, y_aug)
        assert np.linalg.norm(direct - via_aug) < 1e-10


def test_ridge_rejects_negative_penalty():
    X, y = random_instance(5)
    with pytest.raises(ValueError):
        reference.ridge_closed_form(X, y, -0.1)


def test_spectral_info_orthonormal():
    info = reference.spectral_info(np.eye(4))
    assert info.lambda_max == pytest.approx(1.0)
    assert info.lambda_min == pytest.approx(1.0)
    assert info.optimal_step == pytest.approx(1.0)
    assert info.optimal_radius == pytest.approx(0.0)


def test_spectral_info_constructed_eigenvalues():
    # X diagonal with entries 3 and 1 gives X'X eigenvalues 9 and 1
    X = np.diag([3.0, 1.0])
    info = reference.spectral_info(X)
    assert info.lambda_max == pytest.approx(9.0)
    assert info.lambda_min == pytest.approx(1.0)
    assert info.optimal_step == pytest.approx(0.2)
    assert info.optimal_radius == pytest.approx(0.8)


def test_spectral_info_agrees_with_power_iteration():
    X, _ = random_instance(6)
    A = X.T @ X
    v = np.ones(A.shape[0])
    for _ in range(2000):
        v = A @ v
        v = v / np.linalg.norm(v)
    lam = float(v @ A @ v)
    assert reference.spectral_info(X).lambda_max == pytest.approx(lam, rel=1e-6)


def test_suggest_nu_is_ceiled_inverse_step():
    X = np.diag([3.0, 1.0])  # optimal step 0.2
    assert reference.suggest_nu(X) == 5
    assert reference.suggest_nu(0.01 * np.eye(2)) == 1


def test_spectral_bound_at_one_is_the_radius():
    X, _ = random_instance(7)
    info = reference.spectral_info(X)
    assert reference.spectral_bound(X, 1) == pytest.approx(info.spectral_radius, rel=1e-10)


@pytest.mark.parametrize("m", [1, 2, 4, 8])
def test_spectral_bound_dominates_radius(m):
    X, _ = random_instance(8)
    radius = reference.spectral_info(X).spectral_radius
    assert reference.spectral_bound(X, m) >= radius * (1 - 1e-9)


def test_spectral_bound_at_eight_is_tight():
    for seed in range(5):
        X, _ = random_instance(seed + 100)
        radius = reference.spectral_info(X).spectral_radius
        b8 = reference.spectral_bound(X, 8)
        assert b8 <= 1.05 * radius


def test_oscillating_sum_first_terms():
    X, y = random_instance(9, n=20, p=3)
    delta = 0.01
    A = X.T @ X
    g = X.T @ y
    assert np.allclose(reference.oscillating_sum(X, y, delta, 1), delta * g)
    assert np.allclose(
        reference.oscillating_sum(X, y, delta, 2), 2 * delta * g - delta ** 2 * (A @ g)
    )


@pytest.mark.parametrize("k", [1, 2, 3, 4, 5, 6])
def test_oscillating_sum_equals_recursion(k):
    X, y = random_instance(10, n=30, p=5)
    nu = reference.suggest_nu(X)
    plan = FitPlan(GD, K=k, P=5, N=30, phi=2, nu=nu)
    beta_rec = reference.float_gd(X, y, plan)[-1]
    beta_closed = reference.oscillating_sum(X, y, 1.0 / nu, k)
    denom = max(np.linalg.norm(beta_rec), 1e-30)
    assert np.linalg.norm(beta_rec - beta_closed) / denom < 1e-10


def test_trajectories_start_at_zero():
    X, y = random_instance(11, n=10, p=2)
    plan = FitPlan(GD, K=2, P=2, N=10, phi=2, nu=reference.suggest_nu(X))
    for fn in (reference.float_gd, reference.float_cd, reference.float_nag):
        assert np.array_equal(fn(X, y, plan)[0], np.zeros(2))


def test_float_nag_with_zero_momentum_is_gd():
    X, y = random_instance(12, n=15, p=3)
    plan = FitPlan(NAG, K=4, P=3, N=15, phi=2, nu=reference.suggest_nu(X))
    nag = reference.float_nag(X, y, plan, momentum=lambda k: 0.0)
    gd = reference.float_gd(X, y, plan)
    for a, b in zip(nag, gd):
        assert np.array_equal(a, b)


def test_float_vwt_triangle_matches_closed_form():
    X, y = random_instance(13, n=25, p=4)
    for K in (1, 2, 4, 6):
        plan = FitPlan(GD_VWT, K=K, P=4, N=25, phi=2, nu=reference.suggest_nu(X))
        traj = reference.float_vwt(X, y, plan)
        assert len(traj) == K + 2  # iterates plus the combined estimate


def test_gd_converges_inside_the_step_window():
    X, y = random_instance(14)
    info = reference.spectral_info(X)
    plan = FitPlan(GD, K=400, P=5, N=100, phi=2, nu=2)
    good = reference.float_gd(X, y, plan, delta=0.9 * 2.0 / info.spectral_radius)
    beta_ols = reference.ols_closed_form(X, y)
    assert np.linalg.norm(good[-1] - beta_ols) < 1e-4


def test_gd_diverges_outside_the_step_window():
    X, y = random_instance(15)
    info = reference.spectral_info(X)
    plan = FitPlan(GD, K=300, P=5, N=100, phi=2, nu=2)
    bad = reference.float_gd(X, y, plan, delta=1.1 * 2.0 / info.spectral_radius)
    assert np.linalg.norm(bad[-1]) > 1e6


def test_gd_at_optimal_step_reaches_ols():
    rng = np.random.default_rng(16)
    # mildly correlated design
    cov = 0.3 * np.ones((5, 5)) + 0.7 * np.eye(5)
    X = rng.multivariate_normal(np.zeros(5), cov, size=100)
    X = (X - X.mean(axis=0)) / X.std(axis=0, ddof=1)
    y = rng.normal(size=100)
    info = reference.spectral_info(X)
    plan = FitPlan(GD, K=500, P=5, N=100, phi=2, nu=2)
    traj = reference.float_gd(X, y, plan, delta=info.optimal_step)
    assert np.linalg.norm(traj[-1] - reference.ols_closed_form(X, y)) < 1e-6


def test_cd_converges_like_gd_eventually():
    X, y = random_instance(17, n=40, p=3)
    nu = reference.suggest_nu(X)
    plan = FitPlan(CD, K=300, P=3, N=40, phi=2, nu=nu)
    traj = reference.float_cd(X, y, plan)
    assert np.linalg.norm(traj[-1] - reference.ols_closed_form(X, y)) < 1e-6


def test_effective_df_at_zero_is_p():
    X, _ = random_instance(18)
    assert reference.effective_df(X, 0.0) == pytest.approx(5.0, abs=1e-8)


def test_effective_df_decreases_with_penalty():
    X, _ = random_instance(19)
    values = [reference.effective_df(X, a) for a in (0.0, 1.0, 10.0, 100.0, 1e6)]
    assert all(a > b for a, b in zip(values, values[1:]))
    assert values[-1] < 0.1
