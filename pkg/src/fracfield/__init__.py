"""Anisotropic fractional Gaussian fields and their regular-lattice approximations.

The package provides two complementary estimation routes for spatial data
with power-law dependence:

* a dense contrast likelihood for the continuum field observed at
  irregular sites (``dense_mle``), and
* a matrix-free stochastic-score REML estimator for the lattice
  counterpart, with cosine-transform spectral algebra and Krylov solves
  (``hlik``).

Supporting modules cover variogram evaluation (``variograms``), samplers
(``simulate``), a small optimizer toolbox (``numopt``), data ingestion and
serialization (``data_io``), and a command-line driver (``cli``).
"""

__version__ = "0.1.0"

import os as _os

# Oversubscribed BLAS pools badly hurt the dense solves; default the pool
# size before numpy loads (FRACFIELD_THREADS overrides, see _threads).
for _var in ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS"):
    _os.environ.setdefault(_var, _os.environ.get("FRACFIELD_THREADS", "1"))

from ._threads import configure_threads
from .errors import NumericalError
from .spectral import GridSpec, dct2, idct2, lattice_eigenvalues, dense_basis_matrix
from .params import FgfParams, FldParams, FitResult

__all__ = [
    "GridSpec",
    "FgfParams",
    "FldParams",
    "FitResult",
    "NumericalError",
    "configure_threads",
    "dct2",
    "idct2",
    "lattice_eigenvalues",
    "dense_basis_matrix",
    "__version__",
]
