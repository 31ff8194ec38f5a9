import numpy as np
import pytest

from fracfield.dense_mle import (
    contrast_basis,
    fit_fgf,
    neg_log_likelihood,
    transform_params,
    untransform_params,
)
from fracfield.errors import NumericalError
from fracfield.numopt import finite_difference_gradient
from fracfield.params import FgfParams
from fracfield.simulate import add_noise_and_mean, sample_fgf_sites, select_sites, site_coordinates
from fracfield.spectral import GridSpec
from fracfield.variograms import generalized_covariance


def _random_problem(n, seed=0, truth=None):
    truth = truth or FgfParams(tau=1.0, sigma2=1.0, nu=1.4, alpha=0.25)
    rng = np.random.default_rng(seed)
    sites = rng.uniform(0, 25, size=(n, 2))
    psi = sample_fgf_sites(sites, truth.sigma2, truth.nu, truth.alpha, seed=seed)
    y = add_noise_and_mean(psi, truth.mu, truth.tau, seed=seed)
    return sites, y, truth


def test_contrast_basis_two_points():
    c = contrast_basis(2).C
    assert c.shape == (1, 2)
    assert abs(abs(c[0, 0]) - 1 / np.sqrt(2)) < 1e-12
    assert c[0, 0] == pytest.approx(-c[0, 1], abs=1e-12)


@pytest.mark.parametrize("n", [3, 10, 100])
def test_contrast_basis_invariants(n):
    c = contrast_basis(n).C
    assert c.shape == (n - 1, n)
    assert np.max(np.abs(c @ np.ones(n))) < 1e-12
    assert np.max(np.abs(c @ c.T - np.eye(n - 1))) < 1e-12


def test_contrast_basis_requires_two():
    with pytest.raises(ValueError):
        contrast_basis(1)


def test_transform_roundtrip():
    p = FgfParams(tau=2.5, sigma2=0.7, nu=1.33, alpha=0.12)
    back = untransform_params(transform_params(p))
    assert back["tau"] == pytest.approx(p.tau)
    assert back["sigma2"] == pytest.approx(p.sigma2)
    assert back["nu"] == pytest.approx(p.nu)
    assert back["alpha"] == pytest.approx(p.alpha)


def test_nll_matches_brute_force_oracle():
    rng = np.random.default_rng(5)
    n = 10
    sites = rng.uniform(0, 10, size=(n, 2))
    y = rng.normal(size=n)
    basis = contrast_basis(n)
    x = np.array([0.3, -0.2, np.log(0.4), 0.1])
    val = neg_log_likelihood(x, sites, y, basis)

    pars = untransform_params(x)
    du = np.abs(sites[:, 0][:, None] - sites[:, 0][None, :])
    dv = np.abs(sites[:, 1][:, None] - sites[:, 1][None, :])
    sig = generalized_covariance(du, dv, pars["sigma2"], pars["nu"], pars["alpha"])
    m = basis.C @ sig @ basis.C.T + np.eye(n - 1) / pars["tau"]
    cy = basis.C @ y
    _, logdet = np.linalg.slogdet(m)
    oracle = 0.5 * ((n - 1) * np.log(2 * np.pi) + logdet + cy @ np.linalg.solve(m, cy))
    assert abs(val - oracle) < 1e-8


def test_nll_shift_invariance():
    sites, y, _ = _random_problem(20, seed=1)
    basis = contrast_basis(20)
    x = transform_params(FgfParams(tau=1.0, sigma2=1.0, nu=1.5, alpha=0.25))
    a = neg_log_likelihood(x, sites, y, basis)
    b = neg_log_likelihood(x, sites, y + 123.456, basis)
    assert abs(a - b) < 1e-9


def test_nll_basis_invariance():
    # a second valid orthonormal contrast basis built from Helmert rows
    def helmert(n):
        rows = []
        for k in range(1, n):
            r = np.zeros(n)
            r[:k] = 1.0
            r[k] = -k
            rows.append(r / np.sqrt(k * (k + 1)))
        return np.array(rows)

    sites, y, _ = _random_problem(15, seed=2)
    x = transform_params(FgfParams(tau=1.0, sigma2=1.0, nu=1.5, alpha=0.25))
    basis_a = contrast_basis(15)
    basis_b = contrast_basis(15)
    object.__setattr__(basis_b, "C", helmert(15))
    a = neg_log_likelihood(x, sites, y, basis_a)
    b = neg_log_likelihood(x, sites, y, basis_b)
    assert abs(a - b) < 1e-9


def test_nll_permutation_invariance():
    sites, y, _ = _random_problem(18, seed=3)
    x = transform_params(FgfParams(tau=1.0, sigma2=1.0, nu=1.5, alpha=0.25))
    perm = np.random.default_rng(0).permutation(18)
    a = neg_log_likelihood(x, sites, y, contrast_basis(18))
    b = neg_log_likelihood(x, sites[perm], y[perm], contrast_basis(18))
    assert abs(a - b) < 1e-9


def test_nll_domain_error_outside_guard():
    sites, y, _ = _random_problem(8, seed=4)
    basis = contrast_basis(8)
    bad = np.array([0.0, 0.0, np.log(1.2), 0.0])  # nu = 2.2
    with pytest.raises((ValueError, NumericalError)):
        neg_log_likelihood(bad, sites, y, basis)


def test_gradient_against_independent_step():
    # internal differencing (rel 1e-5) vs a finer independent step
    sites, y, truth = _random_problem(50, seed=6)
    basis = contrast_basis(50)
    f = lambda x: neg_log_likelihood(x, sites, y, basis)
    rng = np.random.default_rng(7)
    for _ in range(5):
        x = transform_params(truth) + rng.normal(scale=0.2, size=4)
        g_int = finite_difference_gradient(f, x, rel_step=1e-5)
        g_ref = finite_difference_gradient(f, x, rel_step=3e-6)
        assert np.max(np.abs(g_int - g_ref)) <= 1e-4 * max(1.0, np.max(np.abs(g_ref)))


def test_fit_recovers_truth_smoke():
    grid = GridSpec(30, 30)
    truth = FgfParams(tau=1.0, sigma2=2.0, nu=1.25, alpha=0.25)
    idx = select_sites(grid, seed=9, count=400)
    coords = site_coordinates(grid, idx)
    psi = sample_fgf_sites(coords, truth.sigma2, truth.nu, truth.alpha, seed=9)
    y = add_noise_and_mean(psi, 0.0, truth.tau, seed=9)
    fit = fit_fgf(coords, y, truth)
    assert fit.converged
    assert fit.std_errors is not None
    for key, true_val in (("nu", truth.nu), ("alpha", truth.alpha)):
        assert abs(fit.estimates[key] - true_val) <= 4.0 * fit.std_errors[key]
    # monotone improvement relative to the starting point
    basis = contrast_basis(len(y))
    start = neg_log_likelihood(transform_params(truth), coords, y, basis)
    assert fit.objective_value <= start + 1e-9


def test_fit_constant_data_flagged():
    rng = np.random.default_rng(1)
    sites = rng.uniform(0, 5, size=(20, 2))
    y = np.full(20, 3.0)
    fit = fit_fgf(sites, y, FgfParams(tau=1.0, sigma2=1.0, nu=1.5, alpha=0.25), max_iter=60)
    assert (not fit.converged) or fit.diagnostics["boundary_warnings"]


def test_fit_site_limit():
    sites = np.zeros((10, 2))
    with pytest.raises(ValueError):
        fit_fgf(sites, np.zeros(10), FgfParams(tau=1, sigma2=1, nu=1.5, alpha=0.25), dense_limit=5)


def test_fit_json_shape():
    sites, y, truth = _random_problem(60, seed=10)
    fit = fit_fgf(sites, y, truth, max_iter=80)
    doc = fit.to_json_dict()
    assert doc["model"] == "fgf"
    assert set(doc["estimates"]) == {"tau", "sigma2", "nu", "alpha"}
    if doc["se"] is not None:
        assert set(doc["se"]) == {"tau", "sigma2", "nu", "alpha"}
    assert isinstance(doc["neg_loglik"], float)
