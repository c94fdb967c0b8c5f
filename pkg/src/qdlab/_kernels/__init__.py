"""Hot numerical kernels: compiled extension with pure-numpy fallback.

The propagator-product contour integral inside the graph Monte Carlo engine
dominates runtime; a fused Cython implementation is used when the extension
built, otherwise a chunked numpy implementation with identical semantics.
``BACKEND`` records which one is active; both are importable for the
equality tests and the benchmark.
"""
from . import _fallback

try:  # pragma: no cover - depends on build environment
    from . import _accel

    resolvent_line_integrals = _accel.resolvent_line_integrals
    BACKEND = "compiled"
except ImportError:  # pragma: no cover
    _accel = None
    resolvent_line_integrals = _fallback.resolvent_line_integrals
    BACKEND = "python"


def available_backends() -> dict:
    """Name -> implementation mapping for benchmarking and tests."""
    out = {"python": _fallback.resolvent_line_integrals}
    if _accel is not None:
        out["compiled"] = _accel.resolvent_line_integrals
    return out
