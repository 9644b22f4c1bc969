"""Hot-kernel backend selection.

The compiled Cython core is used when available; otherwise the vectorized
numpy fallback takes over.  Set HAPTOSIM_BACKEND=numpy (or =cython) to
force a choice, e.g. for benchmarking or debugging.
"""

import os

from . import _numpy_impl

_requested = os.environ.get("HAPTOSIM_BACKEND", "").strip().lower()

if _requested == "numpy":
    _impl = _numpy_impl
else:
    try:
        from . import _core as _impl
    except ImportError:
        if _requested == "cython":
            raise ImportError(
                "HAPTOSIM_BACKEND=cython but the compiled core is not built; "
                "run `pip install -e . --no-build-isolation`"
            )
        _impl = _numpy_impl

shifted_laplacian = _impl.shifted_laplacian
upwind_divergence = _impl.upwind_divergence
max_face_speeds = _impl.max_face_speeds
# fused CG driver: compiled core only; None selects the python loop
pcg_solve = getattr(_impl, "pcg_solve", None)


def backend_name():
    return _impl.BACKEND


def available_backends():
    names = ["numpy"]
    try:
        from . import _core  # noqa: F401

        names.append("cython")
    except ImportError:
        pass
    return names


def get_backend(name):
    """Return the raw backend module by name (for tests and benchmarks)."""
    if name == "numpy":
        return _numpy_impl
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
