"""Build the compiled statevector kernels."""

import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extra = ["-O3"]
if os.environ.get("QUESTA_NATIVE", "0") == "1":
    extra.append("-march=native")

extensions = [
    Extension(
        name="questa._ckernels",
        sources=["src/questa/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=extra,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    ),
)
