"""Kernel backend selection.

The compiled core is used when present; the pure-numpy fallback otherwise.
Set SYLVA_FORCE_FALLBACK=1 to force the fallback (tests and benchmarks use
this to compare backends).  Both expose the same two functions and produce
bitwise-identical results.
"""

import os

from . import fallback

if os.environ.get("SYLVA_FORCE_FALLBACK"):
    _impl = fallback
    HAVE_COMPILED = False
else:
    try:
        from . import _core as _impl  # type: ignore[attr-defined]

        HAVE_COMPILED = True
    except ImportError:
        _impl = fallback
        HAVE_COMPILED = False

trace_rays = _impl.trace_rays
voxelize_triangles = _impl.voxelize_triangles


def backend_name() -> str:
    return "compiled" if HAVE_COMPILED else "fallback"
