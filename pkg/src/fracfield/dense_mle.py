"""Dense maximum likelihood for the continuum model at irregular sites.

Only contrasts of the observations have a proper joint law (marginal
variances are infinite for 1 < nu < 2), so the likelihood acts on ``C y``
for an orthonormal contrast basis ``C``.  Fitting runs unconstrained in
transformed coordinates

    x = (log tau, log sigma^-2, log(nu - 1), log(2 alpha / (1 - 2 alpha)))

with a quasi-Newton minimizer; standard errors come out of the numerical
Hessian by the delta method.  Cost per likelihood evaluation is O(n^3)
time and O(n^2) memory, so this route is for moderate n.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from . import numopt
from .errors import NumericalError
from .params import FgfParams, FitResult
from .variograms import NU_GUARD, power_prefactor

DENSE_SITE_LIMIT = 5000


@dataclass(frozen=True)
class ContrastBasis:
    """(n-1) x n matrix with rows spanning the contrast space:
    C 1 = 0 and C C' = I."""

    C: np.ndarray

    @property
    def n(self) -> int:
        return self.C.shape[1]


def contrast_basis(n: int) -> ContrastBasis:
    """Orthonormal contrasts from a QR factorization of the centering projector."""
    if n < 2:
        raise ValueError(f"need at least two observations for contrasts, got {n}")
    centering = np.eye(n) - np.ones((n, n)) / n
    q, _ = np.linalg.qr(centering)
    return ContrastBasis(C=q[:, : n - 1].T)


def transform_params(params: FgfParams) -> np.ndarray:
    return np.array(
        [
            np.log(params.tau),
            np.log(1.0 / params.sigma2),
            np.log(params.nu - 1.0),
            np.log(2.0 * params.alpha / (1.0 - 2.0 * params.alpha)),
        ]
    )


def untransform_params(x: np.ndarray) -> dict[str, float]:
    ex4 = np.exp(x[3])
    return {
        "tau": float(np.exp(x[0])),
        "sigma2": float(np.exp(-x[1])),
        "nu": float(1.0 + np.exp(x[2])),
        "alpha": float(0.5 * ex4 / (1.0 + ex4)),
    }


class _ContrastProblem:
    """Precomputed geometry shared by all likelihood evaluations of one fit."""

    def __init__(self, sites: np.ndarray, y: np.ndarray, basis: ContrastBasis):
        sites = np.asarray(sites, dtype=float)
        y = np.asarray(y, dtype=float)
        n = y.size
        if sites.shape != (n, 2):
            raise ValueError(f"sites must be ({n}, 2) to match y, got {sites.shape}")
        if basis.n != n:
            raise ValueError(f"contrast basis is for n={basis.n}, data has n={n}")
        self.n = n
        self.du2 = (sites[:, 0][:, None] - sites[:, 0][None, :]) ** 2
        self.dv2 = (sites[:, 1][:, None] - sites[:, 1][None, :]) ** 2
        self.C = basis.C
        self.Cy = basis.C @ (y - y.mean())

    def neg_loglik(self, x: np.ndarray) -> float:
        x = np.asarray(x, dtype=float)
        with np.errstate(over="ignore"):
            pars = untransform_params(x)
        if not all(np.isfinite(v) for v in pars.values()):
            raise NumericalError(f"parameters overflow at x={x.tolist()}")
        tau, sigma2, nu, alpha = pars["tau"], pars["sigma2"], pars["nu"], pars["alpha"]
        # Same kernel as generalized_covariance, on precomputed squared lags.
        # alpha saturating to a boundary in float gives infs that the finite
        # check below converts into a NumericalError.
        with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
            dist = self.du2 / (4.0 * alpha) + self.dv2 / (4.0 * (0.5 - alpha))
            sigma = -power_prefactor(sigma2, nu, alpha) * dist ** (nu - 1.0)
        m = self.C @ sigma @ self.C.T
        m[np.diag_indices_from(m)] += 1.0 / tau
        if not np.all(np.isfinite(m)):
            raise NumericalError(f"contrast covariance not finite at x={x.tolist()}")
        scale = max(np.mean(np.abs(np.diag(m))), 1e-300)
        for rel_jitter in (0.0, 1e-10, 1e-8):  # single escalation on failure
            try:
                chol = sla.cholesky(
                    m + rel_jitter * scale * np.eye(self.n - 1), lower=True, check_finite=False
                )
                break
            except np.linalg.LinAlgError:
                chol = None
        if chol is None:
            raise NumericalError(f"contrast covariance not positive definite at x={x.tolist()}")
        half = sla.solve_triangular(chol, self.Cy, lower=True, check_finite=False)
        logdet = 2.0 * np.sum(np.log(np.diag(chol)))
        return 0.5 * ((self.n - 1) * np.log(2.0 * np.pi) + logdet + half @ half)


def neg_log_likelihood(x: np.ndarray, sites: np.ndarray, y: np.ndarray, basis: ContrastBasis) -> float:
    """Negative contrast log-likelihood at transformed parameters ``x``.

    Raises a domain error when the mapped nu leaves the guarded (1, 2)
    interval, and a NumericalError (carrying the parameter point) when the
    factorization fails.
    """
    return _ContrastProblem(sites, y, basis).neg_loglik(np.asarray(x, dtype=float))


def _delta_se(x: np.ndarray, se_x: np.ndarray) -> dict[str, float]:
    pars = untransform_params(x)
    ex4 = np.exp(x[3])
    return {
        "tau": pars["tau"] * se_x[0],
        "sigma2": pars["sigma2"] * se_x[1],
        "nu": (pars["nu"] - 1.0) * se_x[2],
        "alpha": 0.5 * ex4 / (1.0 + ex4) ** 2 * se_x[3],
    }


def fit_fgf(
    sites: np.ndarray,
    y: np.ndarray,
    init: FgfParams,
    gtol: float = 1e-3,
    max_iter: int = 200,
    dense_limit: int = DENSE_SITE_LIMIT,
) -> FitResult:
    """Maximize the contrast likelihood by quasi-Newton descent.

    Non-convergence and boundary proximity are reported in the result
    (flag and diagnostics), never silently dropped; a non-positive-definite
    Hessian leaves ``std_errors`` as None.
    """
    y = np.asarray(y, dtype=float)
    n = y.size
    if n > dense_limit:
        raise ValueError(f"dense estimator limited to n <= {dense_limit}, got n = {n}")
    basis = contrast_basis(n)
    problem = _ContrastProblem(sites, y, basis)

    def objective(x):
        try:
            return problem.neg_loglik(x)
        except (ValueError, NumericalError):
            return np.inf  # line search backtracks away from bad regions

    x0 = transform_params(init)
    report = numopt.minimize_quasi_newton(
        objective, x0, gtol=gtol, xtol=1e-9, max_iter=max_iter
    )

    estimates = untransform_params(report.x)
    boundary = []
    if estimates["nu"] - 1.0 < 10 * NU_GUARD:
        boundary.append("nu near lower boundary 1")
    if 2.0 - estimates["nu"] < 10 * NU_GUARD:
        boundary.append("nu near upper boundary 2")
    if abs(report.x[3]) > 12:
        boundary.append("alpha near boundary of (0, 1/2)")
    if abs(report.x[0]) > 25 or abs(report.x[1]) > 25:
        boundary.append("precision parameter extremely large or small")

    std_errors = None
    if report.hessian is not None:
        try:
            h_inv = np.linalg.inv(report.hessian)
            diag = np.diag(h_inv)
            if np.all(diag > 0) and np.all(np.linalg.eigvalsh(report.hessian) > 0):
                std_errors = _delta_se(report.x, np.sqrt(diag))
        except np.linalg.LinAlgError:
            std_errors = None

    diagnostics = {
        "gradient_inf_norm": float(np.max(np.abs(report.grad))) if report.grad is not None else None,
        "message": report.message,
        "n_evals": report.n_evals,
        "boundary_warnings": boundary,
    }
    return FitResult(
        model="fgf",
        estimates=estimates,
        std_errors=std_errors,
        transformed_optimum=report.x,
        converged=bool(report.converged and not boundary),
        iterations=report.iterations,
        objective_value=float(report.fun),
        diagnostics=diagnostics,
    )


__all__ = [
    "ContrastBasis",
    "contrast_basis",
    "neg_log_likelihood",
    "fit_fgf",
    "transform_params",
    "untransform_params",
    "DENSE_SITE_LIMIT",
]
