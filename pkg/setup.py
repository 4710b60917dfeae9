"""Build script for the optional compiled kernel extension.

The package works without the extension: `cakesim._kernels` falls back to
pure-NumPy implementations when the compiled module is unavailable.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    ext = Extension(
        "cakesim._kernels._core",
        sources=["src/cakesim/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        # fp-contract off: keep float results bit-identical to the fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
    # build failure must not break installation; the fallback covers it
    ext.optional = True
    extensions = cythonize([ext], language_level=3)

setup(ext_modules=extensions)
