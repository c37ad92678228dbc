"""Kernel backend selection.

The compiled extension is preferred when it imported cleanly; otherwise the
pure-numpy implementation is used.  Set ``REGLATER_BACKEND=python`` or
``=cython`` to force one (forcing cython raises if the extension is absent).
"""
from __future__ import annotations

import os

_requested = os.environ.get("REGLATER_BACKEND", "").strip().lower()

if _requested in ("python", "numpy"):
    from . import _py as _impl
    BACKEND = "python"
elif _requested in ("", "cython", "compiled"):
    try:
        from . import _core as _impl  # type: ignore[attr-defined]
        BACKEND = "cython"
    except ImportError:
        if _requested:
            raise ImportError(
                "REGLATER_BACKEND=cython but the compiled extension is not built; "
                "run pip install -e . --no-build-isolation")
        from . import _py as _impl
        BACKEND = "python"
else:
    raise ImportError(f"REGLATER_BACKEND={_requested!r} not recognized (python|cython)")


def _as_f64(a):
    import numpy as np

    return np.ascontiguousarray(a, dtype=np.float64)


def bin_indices(edges, u):
    return _impl.bin_indices(_as_f64(edges), _as_f64(u))


def design_matrix(edges, centers, norm0, norm1, u):
    return _impl.design_matrix(_as_f64(edges), _as_f64(centers), _as_f64(norm0),
                               _as_f64(norm1), _as_f64(u))


def binned_qr(edges, centers, norm0, norm1, u, x):
    return _impl.binned_qr(_as_f64(edges), _as_f64(centers), _as_f64(norm0),
                           _as_f64(norm1), _as_f64(u), _as_f64(x))
