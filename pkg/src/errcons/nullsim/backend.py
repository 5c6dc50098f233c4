"""Selects the compiled kernel when it is importable, else the numpy fallback.

``ERRCONS_BACKEND=numpy`` forces the fallback.
"""
import os

from . import _fallback

try:
    from . import _kernel as _compiled
except ImportError:  # extension not built
    _compiled = None

BACKENDS = {"numpy": _fallback}
if _compiled is not None:
    BACKENDS["cython"] = _compiled


def _default():
    forced = os.environ.get("ERRCONS_BACKEND")
    if forced:
        if forced not in BACKENDS:
            raise RuntimeError(f"ERRCONS_BACKEND={forced!r} not available; have {sorted(BACKENDS)}")
        return BACKENDS[forced]
    return _compiled if _compiled is not None else _fallback


DEFAULT = _default()


def get(name=None):
    if name is None:
        return DEFAULT
    if hasattr(name, "histogram_rows"):
        return name
    try:
        return BACKENDS[name]
    except KeyError:
        raise ValueError(f"unknown backend {name!r}; available: {sorted(BACKENDS)}") from None


def compiled_available() -> bool:
    return _compiled is not None
