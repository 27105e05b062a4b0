"""Kernel backend selection.

The compiled ``_ckernels`` extension is used when it imports; otherwise the
NumPy fallback in ``_pykernels`` takes over. Setting ``VEMSUPG_PURE_PYTHON=1``
forces the fallback.
"""
import os

from vemsupg import _pykernels

BACKEND = "python"
_impl = _pykernels

if os.environ.get("VEMSUPG_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from vemsupg import _ckernels as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:  # extension not built
        _impl = _pykernels

monomial_table = _impl.monomial_table
element_matrices = _impl.element_matrices
points_in_polygon = _impl.points_in_polygon
