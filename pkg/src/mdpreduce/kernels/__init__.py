"""Hot loops behind the solvers.

Two interchangeable implementations share one signature set:

``numba``
    ``@njit`` loops over the CSR row layout (default when numba imports).
``numpy``
    vectorized fallback with no compiled code.

Select with the ``MDPREDUCE_BACKEND`` environment variable before import.
Both backends consume identical inputs (including pre-drawn uniforms for
the simulator), so their outputs agree to the last bit on the sweep and
simulation paths.
"""
import importlib
import os

_CHOICES = ("numba", "numpy")


def _pick():
    requested = os.environ.get("MDPREDUCE_BACKEND", "").strip().lower()
    if requested and requested not in _CHOICES:
        raise ImportError(
            f"MDPREDUCE_BACKEND={requested!r}; expected one of {_CHOICES}")
    if requested == "numpy":
        return "numpy"
    try:
        import numba  # noqa: F401
    except ImportError:
        if requested == "numba":
            raise
        return "numpy"
    return "numba"


def get_backend(name):
    """Return the kernel module for ``name`` regardless of the env flag."""
    if name not in _CHOICES:
        raise ValueError(f"unknown backend {name!r}")
    return importlib.import_module(f"{__name__}.{name}_impl")


BACKEND = _pick()
_impl = get_backend(BACKEND)

row_dot = _impl.row_dot
sweep = _impl.sweep
simulate = _impl.simulate

__all__ = ["BACKEND", "get_backend", "row_dot", "sweep", "simulate"]
