"""Thread-pool configuration.

Multithreaded BLAS is counterproductive for the matrix sizes this package
works with (oversubscription on small containers can slow dense solves by
an order of magnitude), so the CLI and the test suite cap the pools.  The
``FRACFIELD_THREADS`` environment variable overrides the default of 1.
"""

from __future__ import annotations

import os

_ENV_VARS = ("OPENBLAS_NUM_THREADS", "OMP_NUM_THREADS", "MKL_NUM_THREADS")


def configure_threads(n: int | None = None) -> int:
    """Cap BLAS/LAPACK thread pools at ``n`` (default: FRACFIELD_THREADS or 1)."""
    if n is None:
        n = int(os.environ.get("FRACFIELD_THREADS", "1"))
    for var in _ENV_VARS:
        os.environ.setdefault(var, str(n))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass  # env vars above still apply to later imports
    return n


__all__ = ["configure_threads"]
