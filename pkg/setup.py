"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure numpy/scipy fallback is
selected at import time), so a failed compile is downgraded to a warning.
"""

import warnings

from setuptools import Extension, setup


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError as exc:
        warnings.warn(f"compiled kernels skipped ({exc}); using pure-python fallback")
        return []
    ext = Extension(
        "mfgprod.kernels._march_c",
        ["src/mfgprod/kernels/_march_c.pyx"],
        include_dirs=[numpy.get_include()],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions())
