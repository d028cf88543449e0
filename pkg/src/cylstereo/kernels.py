"""Backend selection for the hot kernels.

The compiled ``_core`` extension is used when importable; otherwise, or when
the environment variable ``CYLSTEREO_PURE_PYTHON`` is set to a non-empty
value other than ``0``, the numpy implementation in ``_core_py`` is used.
"""

import os

from . import _core_py

_force_pure = os.environ.get("CYLSTEREO_PURE_PYTHON", "") not in ("", "0")

if _force_pure:
    _impl = _core_py
    BACKEND = "python"
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        BACKEND = "cython"
    except ImportError:
        _impl = _core_py
        BACKEND = "python"

poles = _impl.poles
un_grid = _impl.un_grid
ntilde_grid = _impl.ntilde_grid
window_count_grid = _impl.window_count_grid
upper_hull = _impl.upper_hull

__all__ = ["BACKEND", "poles", "un_grid", "ntilde_grid", "window_count_grid", "upper_hull"]
