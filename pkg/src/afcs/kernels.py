"""Kernel backend selection.

The compiled extension is used when importable; set ``AFCS_PURE_PYTHON=1``
to force the numpy fallback.  ``BACKEND`` names the active choice.
"""
import os

from . import _pykernels

if os.environ.get("AFCS_PURE_PYTHON", "") not in ("", "0"):
    _impl = _pykernels
else:
    try:
        from . import _ckernels as _impl
    except ImportError:
        _impl = _pykernels

BACKEND = "cython" if _impl is not _pykernels else "python"

peel = _impl.peel
bp_check_update = _impl.bp_check_update


def get(name):
    """Return the ``{'peel', 'bp_check_update'}`` pair for ``name`` in {'python', 'cython'}."""
    if name == "python":
        mod = _pykernels
    elif name == "cython":
        from . import _ckernels as mod
    else:
        raise ValueError(f"unknown backend {name!r}")
    return {"peel": mod.peel, "bp_check_update": mod.bp_check_update}


def available():
    """Names of the backends importable in this environment."""
    names = ["python"]
    try:
        from . import _ckernels  # noqa: F401
        names.append("cython")
    except ImportError:
        pass
    return names
