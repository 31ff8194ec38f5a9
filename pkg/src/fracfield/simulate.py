"""Samplers: lattice field draws, continuum draws at irregular sites, the
observation layer (mean + nugget), and site subsampling.

All samplers are pure functions of (inputs, seed).  Distinct random
streams (field noise, nugget noise, site selection, trace probes) are
derived from the user seed with fixed stream tags, so they stay
independent and reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import NumericalError
from .params import FldParams
from .spectral import GridSpec, idct2, lattice_eigenvalues
from .variograms import continuum_variogram

# Stream tags mixed into the seed so the noise sources never collide.
STREAM_FIELD = 1
STREAM_NUGGET = 2
STREAM_SITES = 3
STREAM_PROBES = 4


def stream_rng(seed: int, tag: int) -> np.random.Generator:
    """Independent generator for one named noise stream of a seed."""
    return np.random.default_rng(np.random.SeedSequence(entropy=int(seed), spawn_key=(tag,)))


@dataclass(frozen=True)
class FieldSample:
    """A lattice draw: column-major values plus the provenance seed."""

    grid: GridSpec
    values: np.ndarray
    seed: int


def sample_fld(grid: GridSpec, params: FldParams, seed: int, noise: np.ndarray | None = None) -> FieldSample:
    """Draw the lattice field with precision lam * R^nu on the contrast space.

    Spectral coefficients are iid normal scaled by the inverse square-root
    eigenvalues; every zero-eigenvalue mode (always the constant mode, so
    the grid mean of the draw is exactly zero) carries no randomness.
    ``noise`` substitutes the standard-normal vector for tests.
    """
    eig = lattice_eigenvalues(grid, params.alpha, params.nu, params.kappa, lam=1.0)
    if noise is None:
        eps = stream_rng(seed, STREAM_FIELD).standard_normal(grid.q)
    else:
        eps = np.asarray(noise, dtype=float)
        if eps.shape != (grid.q,):
            raise ValueError(f"noise must have length {grid.q}, got shape {eps.shape}")
    coeffs = np.zeros(grid.q)
    alive = eig > 0
    coeffs[alive] = eps[alive] / np.sqrt(params.lam * eig[alive])
    return FieldSample(grid=grid, values=idct2(coeffs, grid), seed=seed)


def _pairwise_sq(coord: np.ndarray) -> np.ndarray:
    return (coord[:, None] - coord[None, :]) ** 2


def sample_fgf_sites(
    sites: np.ndarray,
    sigma2: float,
    nu: float,
    alpha: float,
    seed: int,
    noise: np.ndarray | None = None,
) -> np.ndarray:
    """Draw the continuum field at irregular sites (dense, n <= ~5000).

    Builds the doubly centered generalized-covariance kernel
    ``K = J (-Gamma) J`` and returns a centered Gaussian vector whose
    contrasts have exactly the intrinsic law: ``var(a' psi) = a' (-Gamma) a``
    for any weights summing to zero.
    """
    sites = np.asarray(sites, dtype=float)
    if sites.ndim != 2 or sites.shape[1] != 2:
        raise ValueError(f"sites must be an (n, 2) array, got shape {sites.shape}")
    n = sites.shape[0]
    if n < 2:
        raise ValueError("need at least two sites")
    du2 = _pairwise_sq(sites[:, 0])
    dv2 = _pairwise_sq(sites[:, 1])
    if np.any((du2 + dv2 + np.eye(n)) == 0):
        raise ValueError("duplicate sites are not allowed")

    gam = continuum_variogram(np.sqrt(du2), np.sqrt(dv2), sigma2, nu, alpha)
    neg = -gam
    k = neg - neg.mean(axis=0, keepdims=True) - neg.mean(axis=1, keepdims=True) + neg.mean()

    jitter = 1e-10 * np.trace(k) / n
    if jitter <= 0:
        jitter = 1e-10
    chol = None
    for _ in range(4):  # escalate x10 up to 3 times
        try:
            chol = np.linalg.cholesky(k + jitter * np.eye(n))
            break
        except np.linalg.LinAlgError:
            jitter *= 10.0
    if chol is None:
        raise NumericalError(f"centered kernel not factorizable after jitter escalation to {jitter:g}")

    if noise is None:
        z = stream_rng(seed, STREAM_FIELD).standard_normal(n)
    else:
        z = np.asarray(noise, dtype=float)
    x = chol @ z
    return x - x.mean()  # exact centering: the constant direction is not identified


def add_noise_and_mean(field_at_sites: np.ndarray, mu: float, tau: float, seed: int) -> np.ndarray:
    """Observation layer: y = mu + psi + eps with eps iid N(0, 1/tau)."""
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau}")
    psi = np.asarray(field_at_sites, dtype=float)
    eps = stream_rng(seed, STREAM_NUGGET).standard_normal(psi.shape) / np.sqrt(tau)
    return mu + psi + eps


def select_sites(
    grid: GridSpec,
    seed: int,
    count: int | None = None,
    fraction: float | None = None,
) -> np.ndarray:
    """Uniform random subset of pixel indices (column-major, sorted).

    ``count`` draws exactly that many pixels without replacement;
    ``fraction`` keeps each pixel independently with that probability, so
    the subset size is Binomial(q, fraction).
    """
    if (count is None) == (fraction is None):
        raise ValueError("specify exactly one of count or fraction")
    rng = stream_rng(seed, STREAM_SITES)
    if count is not None:
        if count < 0 or count > grid.q:
            raise ValueError(f"count must lie in [0, {grid.q}], got {count}")
        if count == 0:
            return np.empty(0, dtype=int)
        return np.sort(rng.choice(grid.q, size=count, replace=False))
    if not 0.0 <= fraction <= 1.0:
        raise ValueError(f"fraction must lie in [0, 1], got {fraction}")
    keep = rng.random(grid.q) < fraction
    return np.flatnonzero(keep)


def site_coordinates(grid: GridSpec, indices: np.ndarray) -> np.ndarray:
    """(u, v) = (row, col) lattice coordinates of column-major pixel indices."""
    indices = np.asarray(indices, dtype=int)
    rows = indices % grid.rows
    cols = indices // grid.rows
    return np.column_stack([rows, cols]).astype(float)


__all__ = [
    "FieldSample",
    "sample_fld",
    "sample_fgf_sites",
    "add_noise_and_mean",
    "select_sites",
    "site_coordinates",
    "stream_rng",
    "STREAM_FIELD",
    "STREAM_NUGGET",
    "STREAM_SITES",
    "STREAM_PROBES",
]
