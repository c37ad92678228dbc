"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-numpy backend is selected at
import time); building it just makes the per-bin regression kernels faster.
Run ``pip install -e . --no-build-isolation`` to compile in place.
"""
from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools.extension import Extension

    ext_modules = cythonize(
        [
            Extension(
                "reglater._kernels._core",
                ["src/reglater/_kernels/_core.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
