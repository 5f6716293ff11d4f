"""Backend selection for the per-pixel kernels.

LUMISEP_BACKEND=numpy forces the pure-numpy path, =numba forces numba
(raising if it cannot be imported), anything else (or unset) tries numba
and silently falls back.  LUMISEP_THREADS caps the numba worker count
(0 or unset = automatic).

`benchmarks/bench_backends.py` times the two paths side by side.
"""

import os

from . import _kernels_numpy

_FORCED = os.environ.get("LUMISEP_BACKEND", "auto").strip().lower()

if _FORCED == "numpy":
    _impl = _kernels_numpy
    BACKEND = "numpy"
else:
    try:
        from . import _kernels_numba as _impl

        BACKEND = "numba"
    except ImportError:
        if _FORCED == "numba":
            raise
        _impl = _kernels_numpy
        BACKEND = "numpy"

if BACKEND == "numba":
    import numba

    _threads = int(os.environ.get("LUMISEP_THREADS", "0") or "0")
    if _threads > 0:
        numba.set_num_threads(min(_threads, numba.config.NUMBA_NUM_THREADS))

solve_beta_gamma = _impl.solve_beta_gamma
nnls_cone = _impl.nnls_cone
render_layers = _impl.render_layers
build_bundle_matrices = _impl.build_bundle_matrices
composite_bundle = _impl.composite_bundle
photometric_stereo_solve = _impl.photometric_stereo_solve
sphere_histogram = _impl.sphere_histogram


def active_backend():
    """Name of the kernel backend in use ('numba' or 'numpy')."""
    return BACKEND
