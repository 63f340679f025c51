import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "sylva._kernels._core",
                ["src/sylva/_kernels/_core.pyx"],
                language="c++",
                include_dirs=[np.get_include()],
                # -ffp-contract=off keeps the compiled kernels bitwise equal
                # to the numpy fallback (no FMA contraction).
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # No Cython available: install runs with the pure-Python fallback.
    extensions = []

setup(ext_modules=extensions)
