"""Matrix-free REML for the lattice model: BLUP, stochastic score, fitting.

The mixed-model system stacks the observed pixels over the nonzero
spectral modes: ``X = [F; B]`` maps the latent field to data predictions
and penalized spectral coordinates, ``Q = diag(tau*I_n, G)`` holds the
precisions, and the estimating equations are the REML score with the
hat-matrix trace replaced by a Rademacher-probe average.

Everything routes through one symmetric positive-definite solve in
spectral coordinates,

    (tau * P F'F P' + L) x = rhs,

preconditioned two-sided by ``diag(1/(tau + L))`` and handled by conjugate
gradients whose matrix-vector product is two cosine transforms plus
elementwise work: O(q log q) time and O(q) memory per iteration.  All
probe systems of one score evaluation are solved as a single block.

The first spectral mode (the grid constant) is never penalized: it
absorbs the model mean, matching the production bookkeeping of the score
equations; ``L`` therefore carries a zero in its first entry even when a
positive ``kappa`` shift is supplied.

A dense oracle (exact score, information matrix, REML value, direct BLUP)
is provided for small grids to test the matrix-free path against.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import numopt
from .errors import NumericalError
from .params import FldParams, FitResult
from .simulate import STREAM_PROBES, stream_rng
from .spectral import (
    GridSpec,
    dctn_stack,
    dense_basis_matrix,
    eigen_factor_grids,
    idctn_stack,
    to_vector,
)

DEFAULT_PROBES = 50
DENSE_ORACLE_LIMIT = 2000


@dataclass(frozen=True)
class HlikSystem:
    """Immutable data + probe bundle for one lattice fit.

    ``counts`` is diag(F'F) bookkeeping (multiplicities from binning);
    computation treats every observed pixel as a single pre-averaged
    observation.  ``z_data`` holds the pixel means, zero where unobserved.
    ``probes`` is the frozen (n + q - 1) x K Rademacher matrix.
    """

    grid: GridSpec
    counts: np.ndarray
    z_data: np.ndarray
    probes: np.ndarray | None = None

    def __post_init__(self) -> None:
        q = self.grid.q
        counts = np.asarray(self.counts, dtype=int)
        z = np.asarray(self.z_data, dtype=float)
        if counts.shape != (q,) or z.shape != (q,):
            raise ValueError(f"counts and z_data must have length q={q}")
        if np.any(counts < 0):
            raise ValueError("counts must be nonnegative")
        if not np.any(counts > 0):
            raise ValueError("need at least one observed pixel")
        if np.any(z[counts == 0] != 0.0):
            raise ValueError("z_data must be zero at unobserved pixels")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "z_data", z)
        if self.probes is not None:
            probes = np.asarray(self.probes, dtype=float)
            if probes.ndim != 2 or probes.shape[0] != self.n + q - 1:
                raise ValueError(f"probes must have {self.n + q - 1} rows, got {probes.shape}")
            if not np.all(np.isin(probes, (-1.0, 1.0))):
                raise ValueError("probe entries must be +-1")
            object.__setattr__(self, "probes", probes)

    @property
    def mask(self) -> np.ndarray:
        return self.counts > 0

    @property
    def n(self) -> int:
        return int(np.count_nonzero(self.counts))

    def with_probes(self, k: int = DEFAULT_PROBES, seed: int = 0) -> "HlikSystem":
        """Fresh copy with K Rademacher probes drawn from the seed."""
        rng = stream_rng(seed, STREAM_PROBES)
        draws = rng.integers(0, 2, size=(self.n + self.grid.q - 1, k)).astype(float) * 2.0 - 1.0
        return replace(self, probes=draws)


def build_system(
    grid: GridSpec,
    values: np.ndarray,
    counts: np.ndarray,
    k: int | None = None,
    seed: int = 0,
) -> HlikSystem:
    """Assemble a system from pre-averaged pixel values and counts."""
    sys_ = HlikSystem(grid=grid, counts=np.asarray(counts), z_data=np.asarray(values, dtype=float))
    if k is not None:
        sys_ = sys_.with_probes(k, seed)
    return sys_


def transform_params(params: FldParams) -> np.ndarray:
    return np.array(
        [
            np.log(params.tau),
            np.log(params.lam),
            np.log(params.nu),
            np.log(2.0 * params.alpha / (1.0 - 2.0 * params.alpha)),
        ]
    )


def untransform_params(x: np.ndarray) -> dict[str, float]:
    return {
        "tau": float(np.exp(x[0])),
        "lambda": float(np.exp(x[1])),
        "nu": float(np.exp(x[2])),
        "alpha": float(0.5 / (1.0 + np.exp(-x[3]))),
    }


def score_chain(x: np.ndarray) -> np.ndarray:
    """d(natural)/d(transformed): (tau, lam, nu, alpha-logistic slope)."""
    sig = 1.0 / (1.0 + np.exp(-x[3]))
    return np.array([np.exp(x[0]), np.exp(x[1]), np.exp(x[2]), 0.5 * sig * (1.0 - sig)])


class _SpectralKernel:
    """Per-parameter-point spectral arrays shared by BLUP and score."""

    def __init__(self, system: HlikSystem, tau: float, lam: float, nu: float, alpha: float, kappa: float):
        grid = system.grid
        r, c = grid.rows, grid.cols
        d_row, d_col = eigen_factor_grids(grid)
        base = kappa + 4.0 * alpha * d_row + 4.0 * (0.5 - alpha) * d_col
        pen = lam * base**nu if nu != 0.0 else lam * np.ones_like(base)
        pen = pen.copy()
        pen[0, 0] = 0.0  # constant mode stays unpenalized, it absorbs the mean
        self.grid = grid
        self.tau = tau
        self.lam = lam
        self.nu = nu
        self.alpha = alpha
        self.base = base
        self.d_row = d_row
        self.d_col = d_col
        self.pen = pen
        self.weight = 1.0 / (tau + pen)
        self.mask_grid = system.mask.reshape((r, c), order="F")
        self.obs_idx = np.flatnonzero(system.mask)  # column-major order

    def matvec(self, y: np.ndarray) -> np.ndarray:
        """Two-sided preconditioned operator W (tau P F'F P' + L) W on (r,c,B)."""
        w = self.weight[:, :, None]
        u = w * y
        t = idctn_stack(u)
        t *= self.mask_grid[:, :, None]
        t = dctn_stack(t)
        return w * (self.tau * t + self.pen[:, :, None] * u)


def _block_cg(
    kernel: _SpectralKernel,
    rhs: np.ndarray,
    tol: float,
    max_iter: int,
    x0: np.ndarray | None,
    labels,
) -> np.ndarray:
    """Solve (tau P F'F P' + L) x = rhs columnwise for an (r, c, B) block.

    Works on the symmetrically preconditioned system; converged columns
    are frozen and dropped from the iteration.  Raises NumericalError
    naming the offending columns if the cap is hit.
    """
    r, c, nb = rhs.shape
    w = kernel.weight[:, :, None]
    b = w * rhs
    bnorm = np.sqrt(np.einsum("ijb,ijb->b", b, b))
    solution = np.zeros_like(rhs)

    active = bnorm > 0.0
    if not np.any(active):
        return solution

    idx = np.flatnonzero(active)
    if x0 is None:
        y = np.zeros((r, c, idx.size))
        resid = b[:, :, idx].copy()
    else:
        y = x0[:, :, idx] / w  # warm start given in solution coordinates
        resid = b[:, :, idx] - kernel.matvec(y)
    p = resid.copy()
    rs = np.einsum("ijb,ijb->b", resid, resid)
    target = (tol * bnorm[idx]) ** 2

    order = idx.copy()
    remaining = np.arange(idx.size)
    y_out = np.zeros((r, c, idx.size))
    converged = rs <= target

    it = 0
    while True:
        if np.any(converged):
            keep = ~converged
            y_out[:, :, remaining[converged]] = y[:, :, converged]
            remaining = remaining[keep]
            if remaining.size == 0:
                break
            y = y[:, :, keep]
            resid = resid[:, :, keep]
            p = p[:, :, keep]
            rs = rs[keep]
            target = target[keep]
        if it >= max_iter:
            bad = [labels[order[j]] for j in remaining]
            worst = float(np.sqrt(np.max(rs / np.maximum(target / tol**2, 1e-300))))
            raise NumericalError(
                f"spectral solve hit the iteration cap {max_iter} for columns {bad}; "
                f"worst relative residual {worst:.3e}"
            )
        ap = kernel.matvec(p)
        pap = np.einsum("ijb,ijb->b", p, ap)
        alpha = rs / pap
        y = y + alpha[None, None, :] * p
        resid = resid - alpha[None, None, :] * ap
        rs_new = np.einsum("ijb,ijb->b", resid, resid)
        beta = rs_new / rs
        p = resid + beta[None, None, :] * p
        rs = rs_new
        converged = rs <= target
        it += 1

    solution[:, :, idx] = w * y_out
    return solution


def _flat_to_grid(flat: np.ndarray, grid: GridSpec) -> np.ndarray:
    """(q, B) column-major block -> (r, c, B)."""
    return flat.reshape((grid.rows, grid.cols, flat.shape[1]), order="F")


def _grid_to_flat(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    return arr.reshape((grid.q, arr.shape[2]), order="F")


def blup_solve(
    system: HlikSystem,
    params: FldParams,
    tol: float = 1e-10,
    max_iter: int | None = None,
) -> np.ndarray:
    """Best linear unbiased prediction of the latent field (length q).

    Solves the spectral normal equations at the given parameters; the
    unpenalized constant mode makes the result reproduce a lone observed
    pixel exactly everywhere.
    """
    kernel = _SpectralKernel(system, params.tau, params.lam, params.nu, params.alpha, params.kappa)
    grid = system.grid
    z_grid = system.z_data.reshape((grid.rows, grid.cols), order="F")
    rhs = params.tau * dctn_stack(z_grid)[:, :, None]
    cap = grid.q if max_iter is None else max_iter
    sol = _block_cg(kernel, rhs, tol, cap, None, labels=["blup"])
    return to_vector(idctn_stack(sol[:, :, 0]))


def _score_pieces(
    kernel: _SpectralKernel,
    system: HlikSystem,
    probes: np.ndarray,
    tol: float,
    max_iter: int,
    carry: dict | None,
) -> tuple[np.ndarray, np.ndarray]:
    """Trace-term probe contributions and residual quadratic forms.

    Returns (per_probe (K, 4), quad (4,)) in natural-parameter coordinates
    (factor 1/2 and probe averaging not applied).  Column 0 of the block
    solve is the BLUP system; the rest are the probes.
    """
    grid = system.grid
    q = grid.q
    n = system.n
    nb = probes.shape[1]
    tau, lam, nu = kernel.tau, kernel.lam, kernel.nu

    pen_flat = to_vector(kernel.pen)
    g_diag = pen_flat[1:]  # q-1 positive spectral precisions
    base_flat = to_vector(kernel.base)[1:]
    with np.errstate(divide="ignore"):
        log_base = np.log(base_flat)
    ddiff_flat = 4.0 * (to_vector(kernel.d_row) - to_vector(kernel.d_col))[1:]
    # dQ/Q ratios on the spectral block (data-block ratios are scalars)
    ratio_nu = log_base
    ratio_alpha = nu * ddiff_flat / base_flat

    u_data = probes[:n, :]
    u_spec = probes[n:, :]

    # rhs block: column 0 = BLUP (tau P z), columns 1.. = P X' Q u_t
    rhs_flat = np.zeros((q, nb + 1))
    z_grid = system.z_data.reshape((grid.rows, grid.cols), order="F")
    rhs_flat[:, 0] = to_vector(tau * dctn_stack(z_grid))
    scatter = np.zeros((q, nb))
    scatter[kernel.obs_idx, :] = tau * u_data
    rhs_flat[:, 1:] = _grid_to_flat(dctn_stack(_flat_to_grid(scatter, grid)), grid)
    rhs_flat[1:, 1:] += g_diag[:, None] * u_spec

    labels = ["blup"] + [f"probe {t}" for t in range(nb)]
    x0 = None
    if carry is not None and carry.get("warm") is not None and carry["warm"].shape == (grid.rows, grid.cols, nb + 1):
        x0 = carry["warm"]
    sol = _block_cg(kernel, _flat_to_grid(rhs_flat, grid), tol, max_iter, x0, labels)
    if carry is not None:
        carry["warm"] = sol

    sol_flat = _grid_to_flat(sol, grid)  # spectral solutions
    sol_phys = _grid_to_flat(idctn_stack(sol), grid)

    # BLUP residuals: data block z - F phi, spectral block -(P phi)[2:]
    phi_spec = sol_flat[:, 0]
    res_data = system.z_data[kernel.obs_idx] - sol_phys[kernel.obs_idx, 0]
    res_spec = phi_spec[1:]
    quad = np.array(
        [
            np.sum(res_data**2),
            np.sum(res_spec**2 * base_flat**nu),
            np.sum(res_spec**2 * g_diag * log_base),
            np.sum(res_spec**2 * lam * nu * ddiff_flat * base_flat ** (nu - 1.0)),
        ]
    )

    # (I - H) u per probe, blockwise
    v_data = u_data - sol_phys[kernel.obs_idx, 1:]
    v_spec = u_spec - sol_flat[1:, 1:]
    tr_tau = np.einsum("nk,nk->k", u_data, v_data) / tau
    tr_lam = np.einsum("nk,nk->k", u_spec, v_spec) / lam
    tr_nu = np.einsum("nk,nk->k", u_spec * ratio_nu[:, None], v_spec)
    tr_alpha = np.einsum("nk,nk->k", u_spec * ratio_alpha[:, None], v_spec)
    per_probe = np.stack([tr_tau, tr_lam, tr_nu, tr_alpha], axis=1)
    return per_probe, quad


def natural_score(
    params: FldParams,
    system: HlikSystem,
    probes: np.ndarray,
    tol: float = 1e-10,
    max_iter: int | None = None,
    carry: dict | None = None,
    exact: bool = False,
) -> np.ndarray:
    """REML score in natural coordinates with the trace term estimated by
    the given probe columns (or summed exactly when ``exact`` and the
    probes enumerate the standard basis)."""
    kernel = _SpectralKernel(system, params.tau, params.lam, params.nu, params.alpha, params.kappa)
    cap = system.grid.q if max_iter is None else max_iter
    per_probe, quad = _score_pieces(kernel, system, probes, tol, cap, carry)
    trace = per_probe.sum(axis=0) if exact else per_probe.mean(axis=0)
    return 0.5 * (trace - quad)


def stochastic_score(
    x: np.ndarray,
    system: HlikSystem,
    kappa: float = 0.0,
    tol: float = 1e-10,
    carry: dict | None = None,
) -> np.ndarray:
    """Transformed-coordinate stochastic score using the system's frozen probes.

    ``kappa`` is a fixed shift, never part of ``x``.  Deterministic given
    the stored probes; raises if none are attached.
    """
    if system.probes is None:
        raise ValueError("system has no probes; call with_probes(k, seed) first")
    x = np.asarray(x, dtype=float)
    with np.errstate(over="ignore"):
        pars = untransform_params(x)
    if not all(np.isfinite(v) and v > 0 for v in pars.values()) or not pars["alpha"] < 0.5:
        return np.full(4, np.inf)  # solver backtracks from overflowed coordinates
    params = FldParams(tau=pars["tau"], lam=pars["lambda"], nu=pars["nu"], alpha=pars["alpha"], kappa=kappa)
    g_nat = natural_score(params, system, system.probes, tol=tol, carry=carry)
    return score_chain(x) * g_nat


def exact_trace_score(params: FldParams, system: HlikSystem, tol: float = 1e-12) -> np.ndarray:
    """Matrix-free score with the probe average replaced by the exact trace
    (standard-basis probes; test support for small systems)."""
    dim = system.n + system.grid.q - 1
    # tiny systems at tight tolerance need more than the q-iteration cap
    return natural_score(params, system, np.eye(dim), tol=tol, max_iter=20 * system.grid.q, exact=True)


def _delta_se(x: np.ndarray, se_x: np.ndarray) -> dict[str, float]:
    chain = score_chain(x)
    return {
        "tau": float(chain[0] * se_x[0]),
        "lambda": float(chain[1] * se_x[1]),
        "nu": float(chain[2] * se_x[2]),
        "alpha": float(chain[3] * se_x[3]),
    }


def fit_fld(
    system: HlikSystem,
    init: FldParams,
    k: int = DEFAULT_PROBES,
    seed: int = 0,
    gtol: float = 1e-2,
    xtol: float = 1e-3,
    max_iter: int = 40,
    solve_tol: float = 1e-10,
) -> FitResult:
    """Solve the stochastic score equations for (tau, lam, nu, alpha).

    Probes are drawn once from the seed (unless already attached to the
    system) and frozen, so the root-finding problem is smooth and the
    result is reproducible bit for bit.  ``init.kappa`` is treated as the
    fixed shift of the model, never estimated.  Standard errors come from
    the score Jacobian at the solution via the delta method; a negative
    diagonal of (-J)^-1 leaves them unset.
    """
    sys_p = system if system.probes is not None else system.with_probes(k, seed)
    carry: dict = {"warm": None}

    def g(x):
        return stochastic_score(x, sys_p, kappa=init.kappa, tol=solve_tol, carry=carry)

    x0 = transform_params(init)
    report = numopt.solve_nonlinear_system(g, x0, gtol=gtol, xtol=xtol, max_iter=max_iter)

    estimates = untransform_params(report.x)
    std_errors = None
    neg_j = None
    if report.jacobian is not None:
        try:
            neg_j_inv = np.linalg.inv(-report.jacobian)
            diag = np.diag(neg_j_inv)
            if np.all(diag > 0):
                std_errors = _delta_se(report.x, np.sqrt(diag))
        except np.linalg.LinAlgError:
            std_errors = None

    diagnostics = {
        "score_inf_norm": float(report.fun),
        "message": report.message,
        "n_evals": report.n_evals,
        "probes": int(sys_p.probes.shape[1]),
        "probe_seed": int(seed),
    }
    return FitResult(
        model="fld",
        estimates=estimates,
        std_errors=std_errors,
        transformed_optimum=report.x,
        converged=bool(report.converged),
        iterations=report.iterations,
        objective_value=None,
        diagnostics=diagnostics,
        kappa=init.kappa,
    )


# ---------------------------------------------------------------------------
# Dense oracle (test support, q <= DENSE_ORACLE_LIMIT)
# ---------------------------------------------------------------------------


def _dense_pieces(params: FldParams, system: HlikSystem):
    grid = system.grid
    q = grid.q
    if q > DENSE_ORACLE_LIMIT:
        raise ValueError(f"dense oracle limited to q <= {DENSE_ORACLE_LIMIT}, got q = {q}")
    kernel = _SpectralKernel(system, params.tau, params.lam, params.nu, params.alpha, params.kappa)
    n = system.n
    p_full = np.kron(dense_basis_matrix(grid.cols), dense_basis_matrix(grid.rows))
    f_rows = np.zeros((n, q))
    f_rows[np.arange(n), kernel.obs_idx] = 1.0
    x_mat = np.vstack([f_rows, p_full[1:, :]])
    pen_flat = to_vector(kernel.pen)
    q_diag = np.concatenate([np.full(n, params.tau), pen_flat[1:]])
    base_flat = to_vector(kernel.base)[1:]
    ddiff_flat = 4.0 * (to_vector(kernel.d_row) - to_vector(kernel.d_col))[1:]
    zeros = np.zeros(n)
    dq = [
        np.concatenate([np.ones(n), np.zeros(q - 1)]),
        np.concatenate([zeros, base_flat**params.nu]),
        np.concatenate([zeros, pen_flat[1:] * np.log(base_flat)]),
        np.concatenate([zeros, params.lam * params.nu * ddiff_flat * base_flat ** (params.nu - 1.0)]),
    ]
    z = np.concatenate([system.z_data[kernel.obs_idx], np.zeros(q - 1)])
    xtqx = x_mat.T @ (q_diag[:, None] * x_mat)
    beta = np.linalg.solve(xtqx, x_mat.T @ (q_diag * z))
    resid = z - x_mat @ beta
    return kernel, x_mat, q_diag, dq, z, xtqx, beta, resid


def dense_blup(params: FldParams, system: HlikSystem) -> np.ndarray:
    """Direct solve of the dense normal equations (oracle for blup_solve)."""
    _, _, _, _, _, xtqx, beta, _ = _dense_pieces(params, system)
    return beta


def dense_reml_loglik(params: FldParams, system: HlikSystem) -> float:
    """Exact restricted log-likelihood (dense; oracle only)."""
    _, _, q_diag, _, _, xtqx, _, resid = _dense_pieces(params, system)
    sign, logdet_x = np.linalg.slogdet(xtqx)
    if sign <= 0:
        raise NumericalError("X'QX not positive definite in dense REML oracle")
    quad = resid @ (q_diag * resid)
    return 0.5 * (np.sum(np.log(q_diag)) - logdet_x - quad)


def dense_score_oracle(params: FldParams, system: HlikSystem) -> tuple[np.ndarray, np.ndarray]:
    """Exact REML score and information matrix via dense assembly."""
    kernel, x_mat, q_diag, dq, z, xtqx, beta, resid = _dense_pieces(params, system)
    xtqx_inv = np.linalg.inv(xtqx)
    g = np.empty(4)
    for i in range(4):
        tr_q = np.sum(dq[i] / q_diag)
        tr_x = np.trace(xtqx_inv @ (x_mat.T @ (dq[i][:, None] * x_mat)))
        quad = resid @ (dq[i] * resid)
        g[i] = 0.5 * (tr_q - tr_x - quad)

    hat = x_mat @ xtqx_inv @ (x_mat.T * q_diag[None, :])
    eye_minus_h = np.eye(hat.shape[0]) - hat
    scaled = [eye_minus_h * (dq[i] / q_diag)[None, :] for i in range(4)]
    info = np.empty((4, 4))
    for i in range(4):
        for j in range(i, 4):
            val = 0.5 * np.sum(scaled[i] * scaled[j].T)
            info[i, j] = info[j, i] = val
    return g, info


def krige_surface(
    fit: FitResult,
    system: HlikSystem,
    trend: tuple[float, float, float] | None = None,
    tol: float = 1e-10,
) -> np.ndarray:
    """Kriged (rows x cols) surface: BLUP at the fitted parameters, plus an
    optional quadratic-in-latitude mean evaluated at pixel centers."""
    if not fit.converged:
        raise ValueError("kriged surface requires a converged fit")
    est = fit.estimates
    params = FldParams(
        tau=est["tau"],
        lam=est["lambda"],
        nu=est["nu"],
        alpha=est["alpha"],
        kappa=fit.kappa if fit.kappa is not None else 0.0,
    )
    phi = blup_solve(system, params, tol=tol)
    surface = phi.reshape((system.grid.rows, system.grid.cols), order="F")
    if trend is not None:
        a0, a1, a2 = trend
        lat = system.grid.pixel_latitudes()
        surface = surface + (a0 + a1 * lat + a2 * lat**2)[:, None]
    return surface


__all__ = [
    "HlikSystem",
    "build_system",
    "blup_solve",
    "stochastic_score",
    "natural_score",
    "exact_trace_score",
    "fit_fld",
    "dense_blup",
    "dense_reml_loglik",
    "dense_score_oracle",
    "krige_surface",
    "transform_params",
    "untransform_params",
    "score_chain",
    "DEFAULT_PROBES",
    "DENSE_ORACLE_LIMIT",
]
