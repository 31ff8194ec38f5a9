"""Parameter sets for the continuum and lattice models, and fit results."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class FgfParams:
    """Continuum-model parameters: nugget precision tau, field scale sigma2,
    fractional order nu in (1, 2), anisotropy alpha in (0, 1/2), mean mu."""

    tau: float
    sigma2: float
    nu: float
    alpha: float
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not 1.0 < self.nu < 2.0:
            raise ValueError(f"nu must lie in (1, 2) for the continuum model, got {self.nu}")
        if not 0.0 < self.alpha < 0.5:
            raise ValueError(f"alpha must lie in (0, 1/2), got {self.alpha}")


@dataclass(frozen=True)
class FldParams:
    """Lattice-model parameters.

    ``lam`` is the field precision scale m^2/sigma_m^2; ``kappa`` is a
    fixed, never-estimated range shift (0 gives the intrinsic model).
    """

    tau: float
    lam: float
    nu: float
    alpha: float
    kappa: float = 0.0
    mu: float = 0.0

    def __post_init__(self) -> None:
        if not self.tau > 0:
            raise ValueError(f"tau must be positive, got {self.tau}")
        if not self.lam > 0:
            raise ValueError(f"lam must be positive, got {self.lam}")
        if self.nu < 0:
            raise ValueError(f"nu must be nonnegative, got {self.nu}")
        if not 0.0 <= self.alpha <= 0.5:
            raise ValueError(f"alpha must lie in [0, 1/2], got {self.alpha}")
        if self.kappa < 0:
            raise ValueError(f"kappa must be nonnegative, got {self.kappa}")


@dataclass
class FitResult:
    """Estimates with delta-method standard errors and solver diagnostics.

    ``estimates`` and ``std_errors`` are keyed by natural-scale parameter
    names; ``std_errors`` is None when the curvature matrix at the optimum
    was not positive definite.  ``transformed_optimum`` stores the internal
    unconstrained coordinates of the solution.
    """

    model: str
    estimates: dict[str, float]
    std_errors: dict[str, float] | None
    transformed_optimum: np.ndarray
    converged: bool
    iterations: int
    objective_value: float | None
    diagnostics: dict = field(default_factory=dict)
    kappa: float | None = None

    def to_json_dict(self) -> dict:
        out = {
            "model": self.model,
            "estimates": {k: float(v) for k, v in self.estimates.items()},
            "se": None if self.std_errors is None else {k: float(v) for k, v in self.std_errors.items()},
            "converged": bool(self.converged),
            "iterations": int(self.iterations),
            "neg_loglik": None if self.objective_value is None else float(self.objective_value),
            "transformed_optimum": [float(v) for v in np.asarray(self.transformed_optimum)],
            "diagnostics": self.diagnostics,
        }
        if self.kappa is not None:
            out["kappa"] = float(self.kappa)
        return out


__all__ = ["FgfParams", "FldParams", "FitResult"]
