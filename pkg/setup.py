import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

omp = [] if os.environ.get("CARNOT_NO_OPENMP") else ["-fopenmp"]

ext_modules = [
    Extension(
        "carnoteig._kernels_ext",
        sources=["src/carnoteig/_kernels_ext.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"] + omp,
        extra_link_args=omp,
    )
]

setup(ext_modules=cythonize(ext_modules, language_level=3))
