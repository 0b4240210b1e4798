"""Build script: compiles the optional quadrature-kernel extension.

The package works without the extension (a NumPy fallback is selected at
import time); any compilation failure therefore degrades to a pure-Python
install instead of aborting.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from setuptools import Extension
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "layerpot._kernels",
                ["src/layerpot/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - depends on build environment
    print(f"layerpot: skipping compiled kernels ({exc}); using NumPy fallback")

setup(ext_modules=ext_modules)
