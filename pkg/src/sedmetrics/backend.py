"""Kernel backend selection.

The numeric hot loops (piecewise means, moving medians, the PSD-ROC
threshold sweep) exist twice: a numba ``@njit`` version and a pure-numpy
version. The active backend is chosen once per call site via
:func:`resolve_backend`:

* ``SEDMETRICS_BACKEND=numpy`` forces the pure-numpy path,
* ``SEDMETRICS_BACKEND=numba`` requires numba (raises if unavailable),
* unset/auto picks numba when importable, numpy otherwise.

Both backends compute identical results; ``benchmarks/benchmark_backends.py``
compares their speed.
"""

import os

ENV_VAR = "SEDMETRICS_BACKEND"

_VALID = ("auto", "numba", "numpy")


def numba_available() -> bool:
    try:
        import numba  # noqa: F401
    except ImportError:
        return False
    return True


def resolve_backend(name: str | None = None) -> str:
    """Return the backend to use: ``"numba"`` or ``"numpy"``.

    ``name`` overrides the ``SEDMETRICS_BACKEND`` environment variable;
    ``None`` or ``"auto"`` defers to the environment, then availability.
    """
    if name is None:
        name = os.environ.get(ENV_VAR, "auto").strip().lower() or "auto"
    if name not in _VALID:
        raise ValueError(f"unknown backend {name!r}, expected one of {_VALID}")
    if name == "auto":
        return "numba" if numba_available() else "numpy"
    if name == "numba" and not numba_available():
        raise RuntimeError("backend 'numba' requested but numba is not importable")
    return name
