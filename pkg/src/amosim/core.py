"""Core selection: compiled extension when available, pure Python otherwise.

Set AMO_SIM_KERNEL=py to force the pure path (used by the benchmark and the
equivalence tests); AMO_SIM_KERNEL=c insists on the compiled core.
"""

from __future__ import annotations

import os

from . import _pyrun

try:
    from . import _core as _compiled
except ImportError:  # pragma: no cover - build-environment dependent
    _compiled = None


def _want() -> str:
    return os.environ.get("AMO_SIM_KERNEL", "auto").lower()


def kernel_name() -> str:
    choice = _want()
    if choice == "py":
        return "py"
    if choice == "c":
        if _compiled is None:
            raise RuntimeError("AMO_SIM_KERNEL=c but amosim._core is not built")
        return "c"
    return "c" if _compiled is not None else "py"


def compiled_available() -> bool:
    return _compiled is not None


def run_core(**kwargs) -> dict:
    if kernel_name() == "c":
        return _compiled.run_core(**kwargs)
    return _pyrun.run_core(**kwargs)


def explore_core(**kwargs) -> dict:
    from . import _pyexplore

    if kernel_name() == "c":
        return _compiled.explore_core(**kwargs)
    return _pyexplore.explore_core(**kwargs)
