"""Scoring kernels with a compiled fast path.

The extension is optional: when the build skipped it (no compiler, no
cython), the numpy fallback takes over with identical results.
"""

try:
    from ghostline._kernels._fast import fill_distribution

    BACKEND = "compiled"
except ImportError:
    from ghostline._kernels.pure import fill_distribution

    BACKEND = "numpy"

__all__ = ["fill_distribution", "BACKEND"]
