"""Build script: compiles the optional scoring kernel.

The package works without the extension (a numpy fallback is selected at
import time), so any failure here downgrades to a pure-python install
instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/ghostline/_kernels/_fast.pyx"],
        compiler_directives={"language_level": 3},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
