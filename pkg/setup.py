"""Build script: compiles the optional fast-kernel extension when Cython is
available. The package works without it (pure numpy fallback selected at
import time), so any build failure here downgrades to a plain install."""

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "meshcim._kernels",
                ["src/meshcim/_kernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-env dependent
    print(f"meshcim: skipping compiled kernels ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
