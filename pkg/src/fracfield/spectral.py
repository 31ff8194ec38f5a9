"""Orthonormal 2-D cosine transforms and the spectrum of the lattice operator.

Every field on an ``r x c`` grid is exchanged as a length ``q = r*c``
vector in column-major order (row index fastest).  The transform pair
``dct2``/``idct2`` applies the orthonormal basis ``P = P_c (x) P_r``
where ``P_l`` is the type-II cosine matrix with first row ``l**-0.5`` and
later rows ``sqrt(2/l) * cos(pi*(i-1)*(j-0.5)/l)``.  ``dct2`` computes
``P v`` and ``idct2`` computes ``P^T v``; both run in O(q log q) without
materializing ``P``.

The anisotropic five-point difference operator restricted to the grid is
diagonalized by this basis; ``lattice_eigenvalues`` returns the diagonal
of its fractional power, shifted and scaled.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.fft as _fft


@dataclass(frozen=True)
class GridSpec:
    """Regular rectangular lattice geometry.

    ``spacing`` is the lattice mesh (1/m); ``bbox`` optionally maps the
    array onto a geographic box as (lat_north, lat_south, lon_west,
    lon_east), rows running north to south and columns west to east.
    """

    rows: int
    cols: int
    spacing: float = 1.0
    bbox: tuple[float, float, float, float] | None = None

    def __post_init__(self) -> None:
        if self.rows < 1 or self.cols < 1:
            raise ValueError(f"grid must have positive dimensions, got {self.rows}x{self.cols}")
        if not self.spacing > 0:
            raise ValueError(f"grid spacing must be positive, got {self.spacing}")
        if self.bbox is not None:
            lat_n, lat_s, lon_w, lon_e = self.bbox
            if not (lat_n > lat_s and lon_e > lon_w):
                raise ValueError(f"degenerate bounding box {self.bbox}")

    @property
    def q(self) -> int:
        return self.rows * self.cols

    @property
    def refinement(self) -> float:
        """m = 1/spacing."""
        return 1.0 / self.spacing

    def pixel_latitudes(self) -> np.ndarray:
        """Latitude of each pixel center, by row (requires bbox)."""
        if self.bbox is None:
            raise ValueError("grid has no geographic bounding box")
        lat_n, lat_s = self.bbox[0], self.bbox[1]
        step = (lat_n - lat_s) / self.rows
        return lat_n - step * (np.arange(self.rows) + 0.5)

    def pixel_longitudes(self) -> np.ndarray:
        """Longitude of each pixel center, by column (requires bbox)."""
        if self.bbox is None:
            raise ValueError("grid has no geographic bounding box")
        lon_w, lon_e = self.bbox[2], self.bbox[3]
        step = (lon_e - lon_w) / self.cols
        return lon_w + step * (np.arange(self.cols) + 0.5)


def _check_length(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.q,):
        raise ValueError(f"field has shape {v.shape}, expected ({grid.q},) for {grid.rows}x{grid.cols} grid")
    return v


def to_array(v: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Column-major length-q vector -> (rows, cols) array."""
    return _check_length(v, grid).reshape((grid.rows, grid.cols), order="F")


def to_vector(a: np.ndarray) -> np.ndarray:
    """(rows, cols) array -> column-major length-q vector."""
    return np.asarray(a, dtype=float).reshape(-1, order="F")


def dctn_stack(a: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Forward transform of an (r, c, ...) stack along the first two axes."""
    return _fft.dctn(a, type=2, norm="ortho", axes=(0, 1), workers=workers)


def idctn_stack(a: np.ndarray, workers: int | None = None) -> np.ndarray:
    """Inverse (transpose) transform of an (r, c, ...) stack."""
    return _fft.idctn(a, type=2, norm="ortho", axes=(0, 1), workers=workers)


def dct2(field: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply P to a column-major field vector, returning spectral coefficients.

    Coefficient 1 (first column-major entry) multiplies the constant basis
    function and corresponds to the zero eigenvalue of the lattice operator.
    """
    a = to_array(field, grid)
    return to_vector(dctn_stack(a))


def idct2(coeffs: np.ndarray, grid: GridSpec) -> np.ndarray:
    """Apply P^T to spectral coefficients, returning the field vector."""
    a = to_array(coeffs, grid)
    return to_vector(idctn_stack(a))


def axis_frequencies(l: int) -> np.ndarray:
    """Eigenvalue factors d_i = sin^2(pi*(i-1)/(2l)) of the 1-D difference operator."""
    i = np.arange(l)
    return np.sin(0.5 * np.pi * i / l) ** 2


def eigen_factor_grids(grid: GridSpec) -> tuple[np.ndarray, np.ndarray]:
    """Row- and column-direction eigenvalue factors as (rows, cols) arrays."""
    d_r = axis_frequencies(grid.rows)
    d_c = axis_frequencies(grid.cols)
    return (
        np.broadcast_to(d_r[:, None], (grid.rows, grid.cols)),
        np.broadcast_to(d_c[None, :], (grid.rows, grid.cols)),
    )


def lattice_eigenvalues(
    grid: GridSpec,
    alpha: float,
    nu: float,
    kappa: float = 0.0,
    lam: float = 1.0,
) -> np.ndarray:
    """Diagonal of the scaled fractional-power spectrum, column-major.

    Entry (i, j) is ``lam * (kappa + 4*alpha*d_row(i) + 4*(1/2-alpha)*d_col(j))**nu``.
    With ``kappa=0`` and ``nu > 0`` the first entry is exactly zero and all
    others are positive for interior ``alpha``.  ``0**0`` is taken as 1 so
    that ``nu=0`` yields the identity spectrum.
    """
    if not 0.0 <= alpha <= 0.5:
        raise ValueError(f"alpha must lie in [0, 1/2], got {alpha}")
    if nu < 0:
        raise ValueError(f"nu must be nonnegative, got {nu}")
    if kappa < 0:
        raise ValueError(f"kappa must be nonnegative, got {kappa}")
    if not lam > 0:
        raise ValueError(f"lam must be positive, got {lam}")
    d_row, d_col = eigen_factor_grids(grid)
    base = kappa + 4.0 * alpha * d_row + 4.0 * (0.5 - alpha) * d_col
    if nu == 0.0:
        vals = np.ones_like(base)
    else:
        vals = base**nu
    return lam * to_vector(vals)


def dense_basis_matrix(l: int) -> np.ndarray:
    """Explicit l x l orthonormal cosine basis (test oracle, l <= 64)."""
    if not 1 <= l <= 64:
        raise ValueError(f"dense basis limited to 1 <= l <= 64, got {l}")
    i = np.arange(l)[:, None]
    j = np.arange(l)[None, :]
    p = np.sqrt(2.0 / l) * np.cos(np.pi * i * (j + 0.5) / l)
    p[0, :] = l**-0.5
    return p


__all__ = [
    "GridSpec",
    "dct2",
    "idct2",
    "dctn_stack",
    "idctn_stack",
    "to_array",
    "to_vector",
    "axis_frequencies",
    "eigen_factor_grids",
    "lattice_eigenvalues",
    "dense_basis_matrix",
]
