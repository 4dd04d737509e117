"""Bound-propagation kernels with a compiled core and a NumPy fallback.

The compiled Cython core (``_core``) is preferred when importable; the
pure-NumPy fallback (``_fallback``) implements the identical contracts.
Set the environment variable ``SHAPBOUND_PURE_PYTHON=1`` to start on the
fallback, or call :func:`use_backend` to switch at runtime (used by the
parity tests and the kernel benchmark).
"""

import os

from . import _fallback

_FUNCTIONS = (
    "affine_ibp",
    "relu_relaxation",
    "tanh_relaxation",
    "backsub",
    "concretize_min",
    "concretize_max",
    "interval_matvec",
    "interval_scale",
    "tanh_derivative_interval",
)

_BACKENDS = {"python": _fallback}
try:
    from . import _core  # type: ignore[attr-defined]

    _BACKENDS["compiled"] = _core
except ImportError:
    pass

BACKEND = "python"


def available_backends() -> tuple[str, ...]:
    return tuple(sorted(_BACKENDS))


def use_backend(name: str) -> str:
    """Select the active kernel backend; returns the previous one."""
    if name not in _BACKENDS:
        raise ValueError(f"unknown backend {name!r}; have {available_backends()}")
    global BACKEND
    previous = BACKEND
    impl = _BACKENDS[name]
    for fn in _FUNCTIONS:
        globals()[fn] = getattr(impl, fn)
    BACKEND = name
    return previous


if os.environ.get("SHAPBOUND_PURE_PYTHON", "") not in ("", "0"):
    use_backend("python")
elif "compiled" in _BACKENDS:
    use_backend("compiled")
else:
    use_backend("python")

__all__ = ["BACKEND", "available_backends", "use_backend", *_FUNCTIONS]
