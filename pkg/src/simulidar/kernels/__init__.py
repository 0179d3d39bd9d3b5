"""Rasterization kernel backends.

The compiled Cython extension is preferred; the pure-numpy fallback is
selected when the extension is not built or SIMULIDAR_PURE_PYTHON is set.
Both produce identical results (enforced by the test suite).
"""

import os

from . import _fallback


def _select():
    if os.environ.get("SIMULIDAR_PURE_PYTHON"):
        return _fallback
    try:
        from . import _zbuffer  # noqa: PLC0415

        return _zbuffer
    except ImportError:
        return _fallback


_impl = _select()

BACKEND_NAME = _impl.BACKEND_NAME
zbuffer_argmin = _impl.zbuffer_argmin
scatter_last = _impl.scatter_last


def available_backends():
    """All importable backend modules, keyed by name (for tests/benchmarks)."""
    backends = {_fallback.BACKEND_NAME: _fallback}
    try:
        from . import _zbuffer  # noqa: PLC0415

        backends[_zbuffer.BACKEND_NAME] = _zbuffer
    except ImportError:
        pass
    return backends
