"""Backend selection: compiled kernel if available, numpy fallback otherwise.

Set CANARD_LAB_PURE_PYTHON=1 to force the fallback (used by the backend
agreement tests and the benchmark).
"""

from __future__ import annotations

import os

_force_pure = os.environ.get("CANARD_LAB_PURE_PYTHON", "").strip().lower() not in (
    "",
    "0",
    "false",
)

if _force_pure:
    from . import _fallback as _impl
else:
    try:
        from . import _native as _impl  # type: ignore[attr-defined]
    except ImportError:
        from . import _fallback as _impl

BACKEND = _impl.BACKEND_NAME
solve_poly_rk45 = _impl.solve_poly_rk45


def available_backends():
    """Names of the kernels importable right now."""
    names = ["python"]
    try:
        from . import _native  # noqa: F401

        names.insert(0, "native")
    except ImportError:
        pass
    return names
