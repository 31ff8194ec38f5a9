"""Small optimizer toolbox: BFGS minimizer, dogleg root finder, finite differences.

Both estimators run in unconstrained transformed coordinates, so only
unconstrained machinery is provided.  All differentiation is by central
differences with a relative step (default 1e-5); evaluations and
reductions happen in a fixed order, so identical inputs give identical
reports.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class OptReport:
    """Outcome of a minimize/solve call."""

    x: np.ndarray
    fun: float
    iterations: int
    converged: bool
    message: str
    grad: np.ndarray | None = None
    hessian: np.ndarray | None = None
    jacobian: np.ndarray | None = None
    n_evals: int = 0
    diagnostics: dict = field(default_factory=dict)


def _steps(x: np.ndarray, rel_step: float) -> np.ndarray:
    return np.maximum(rel_step * np.abs(x), rel_step)


def finite_difference_gradient(f, x, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference gradient; per-coordinate step max(rel*|x_i|, rel)."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    g = np.empty_like(x)
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        fp, fm = f(xp), f(xm)
        if not (np.isfinite(fp) and np.isfinite(fm)):
            raise FloatingPointError(f"non-finite objective while differencing coordinate {i}")
        g[i] = (fp - fm) / (2.0 * h[i])
    return g


def finite_difference_jacobian(g, x, rel_step: float = 1e-5) -> np.ndarray:
    """Central-difference Jacobian of a vector-valued map."""
    x = np.asarray(x, dtype=float)
    h = _steps(x, rel_step)
    cols = []
    for i in range(x.size):
        xp = x.copy()
        xm = x.copy()
        xp[i] += h[i]
        xm[i] -= h[i]
        gp = np.asarray(g(xp), dtype=float)
        gm = np.asarray(g(xm), dtype=float)
        if not (np.all(np.isfinite(gp)) and np.all(np.isfinite(gm))):
            raise FloatingPointError(f"non-finite system value while differencing coordinate {i}")
        cols.append((gp - gm) / (2.0 * h[i]))
    return np.stack(cols, axis=1)


def finite_difference_hessian(f, x, rel_step: float = 1e-5) -> np.ndarray:
    """Symmetrized central differences of the central-difference gradient."""
    grad = lambda z: finite_difference_gradient(f, z, rel_step)
    jac = finite_difference_jacobian(grad, x, rel_step)
    return 0.5 * (jac + jac.T)


def minimize_quasi_newton(
    f,
    x0,
    gtol: float = 1e-5,
    xtol: float = 1e-9,
    max_iter: int = 200,
    rel_step: float = 1e-5,
    with_hessian: bool = True,
) -> OptReport:
    """BFGS descent with backtracking line search and FD gradients.

    Terminates when the gradient infinity norm drops below ``gtol``, the
    step falls below ``xtol``, or the iteration cap is hit.  A non-finite
    objective during the line search triggers backtracking; if no finite
    point is found the report is flagged failed.
    """
    x = np.asarray(x0, dtype=float).copy()
    n = x.size
    evals = [0]

    def fx(z):
        evals[0] += 1
        v = f(z)
        return float(v)

    f0 = fx(x)
    if not np.isfinite(f0):
        return OptReport(x, f0, 0, False, "objective not finite at start", n_evals=evals[0])

    try:
        g = finite_difference_gradient(fx, x, rel_step)
    except FloatingPointError as exc:
        return OptReport(x, f0, 0, False, f"gradient not finite at start: {exc}", n_evals=evals[0])
    h_inv = np.eye(n)
    converged = False
    message = "iteration cap reached"
    it = 0
    for it in range(1, max_iter + 1):
        if np.max(np.abs(g)) < gtol:
            converged = True
            message = "gradient tolerance satisfied"
            it -= 1
            break
        d = -h_inv @ g
        if d @ g >= 0:  # safeguard against a broken curvature estimate
            h_inv = np.eye(n)
            d = -g
        # Backtracking Armijo search; non-finite trial values just shrink.
        t = 1.0
        f_new = np.inf
        armijo = 1e-4 * (g @ d)
        ok = False
        for _ in range(40):
            f_try = fx(x + t * d)
            if np.isfinite(f_try) and f_try <= f0 + t * armijo:
                f_new = f_try
                ok = True
                break
            t *= 0.5
        if not ok:
            message = "line search failed to find a finite decrease"
            break
        s = t * d
        x_new = x + s
        try:
            g_new = finite_difference_gradient(fx, x_new, rel_step)
        except FloatingPointError:
            # accepted point sits against a non-finite region; stop here
            x, f0 = x_new, f_new
            message = "objective not finite within a differencing step of the iterate"
            break
        y = g_new - g
        sy = s @ y
        if sy > 1e-12 * np.linalg.norm(s) * np.linalg.norm(y):
            if it == 1:
                h_inv *= sy / (y @ y)  # initial curvature scaling
            rho = 1.0 / sy
            v = np.eye(n) - rho * np.outer(s, y)
            h_inv = v @ h_inv @ v.T + rho * np.outer(s, s)
        x, f0, g = x_new, f_new, g_new
        if np.max(np.abs(s)) < xtol:
            converged = True
            message = "step tolerance satisfied"
            break
    else:
        it = max_iter

    if converged and np.max(np.abs(g)) < gtol:
        message = "gradient tolerance satisfied"

    hess = None
    if with_hessian:
        try:
            hess = finite_difference_hessian(fx, x, rel_step)
        except FloatingPointError:
            hess = None

    return OptReport(
        x=x,
        fun=f0,
        iterations=it,
        converged=converged,
        message=message,
        grad=g,
        hessian=hess,
        n_evals=evals[0],
    )


def _dogleg_step(g_val: np.ndarray, jac: np.ndarray, radius: float) -> np.ndarray:
    """Powell dogleg step for the Gauss-Newton model of 0.5*||g||^2."""
    grad = jac.T @ g_val
    gnorm = np.linalg.norm(grad)
    if gnorm == 0.0:
        return np.zeros_like(g_val)
    try:
        newton = np.linalg.solve(jac, -g_val)
    except np.linalg.LinAlgError:
        newton = np.linalg.lstsq(jac, -g_val, rcond=None)[0]
    if np.all(np.isfinite(newton)) and np.linalg.norm(newton) <= radius:
        return newton
    jg = jac @ grad
    t = gnorm**2 / (jg @ jg)
    cauchy = -t * grad
    cnorm = np.linalg.norm(cauchy)
    if cnorm >= radius:
        return cauchy * (radius / cnorm)
    diff = newton - cauchy
    a = diff @ diff
    b = 2.0 * cauchy @ diff
    c = cnorm**2 - radius**2
    s = (-b + np.sqrt(max(b * b - 4 * a * c, 0.0))) / (2 * a)
    return cauchy + s * diff


def solve_nonlinear_system(
    g,
    x0,
    gtol: float = 1e-2,
    xtol: float = 1e-3,
    max_iter: int = 40,
    rel_step: float = 1e-5,
) -> OptReport:
    """Trust-region dogleg root finder with central FD Jacobians.

    Converged means ``||g||_inf < gtol`` at the returned point.  Trust
    radius collapse or the iteration cap return the best point seen,
    flagged not converged.  The Jacobian is recomputed by finite
    differences after every accepted step.
    """
    x = np.asarray(x0, dtype=float).copy()
    evals = [0]

    def gx(z):
        evals[0] += 1
        return np.asarray(g(z), dtype=float)

    g_val = gx(x)
    if not np.all(np.isfinite(g_val)):
        return OptReport(x, np.inf, 0, False, "system not finite at start", n_evals=evals[0])

    best_x, best_g = x.copy(), g_val.copy()

    def gnorm(v):
        return float(np.max(np.abs(v)))

    radius = 1.0
    jac = finite_difference_jacobian(gx, x, rel_step)
    converged = gnorm(g_val) < gtol
    message = "converged at start" if converged else "iteration cap reached"
    it = 0
    while not converged and it < max_iter:
        it += 1
        accepted = False
        for _ in range(30):  # shrink until a step is accepted or radius collapses
            step = _dogleg_step(g_val, jac, radius)
            snorm = np.linalg.norm(step)
            if snorm < 1e-14:
                break
            g_try = gx(x + step)
            if np.all(np.isfinite(g_try)):
                pred = np.linalg.norm(g_val) ** 2 - np.linalg.norm(g_val + jac @ step) ** 2
                actual = np.linalg.norm(g_val) ** 2 - np.linalg.norm(g_try) ** 2
                ratio = actual / pred if pred > 0 else -1.0
            else:
                ratio = -1.0
            if ratio >= 1e-4:
                x = x + step
                g_val = g_try
                if np.linalg.norm(g_val) < np.linalg.norm(best_g):
                    best_x, best_g = x.copy(), g_val.copy()
                if ratio > 0.75 and snorm > 0.8 * radius:
                    radius = min(2.0 * radius, 1e3)
                elif ratio < 0.25:
                    radius = max(0.25 * snorm, 1e-12)
                accepted = True
                break
            radius = max(0.25 * snorm, 1e-14)
            if radius < 1e-12:
                break
        if not accepted:
            message = "trust radius collapsed"
            break
        if gnorm(g_val) < gtol:
            converged = True
            message = "residual tolerance satisfied"
            break
        if np.max(np.abs(step)) < xtol and gnorm(g_val) < gtol:
            converged = True
            message = "step tolerance satisfied"
            break
        jac = finite_difference_jacobian(gx, x, rel_step)

    x_out, g_out = (x, g_val) if gnorm(g_val) <= gnorm(best_g) else (best_x, best_g)
    converged = gnorm(g_out) < gtol
    jac_final = finite_difference_jacobian(gx, x_out, rel_step)
    return OptReport(
        x=x_out,
        fun=gnorm(g_out),
        iterations=it,
        converged=converged,
        message=message if not converged else "residual tolerance satisfied",
        grad=g_out,
        jacobian=jac_final,
        n_evals=evals[0],
    )


__all__ = [
    "OptReport",
    "minimize_quasi_newton",
    "solve_nonlinear_system",
    "finite_difference_gradient",
    "finite_difference_jacobian",
    "finite_difference_hessian",
]
