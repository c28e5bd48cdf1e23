import os
import sys

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

if cythonize is None or os.environ.get("ROPELAB_NO_EXT"):
    ext_modules = []
else:
    openmp = [] if sys.platform == "darwin" else ["-fopenmp"]
    ext_modules = cythonize(
        Extension(
            "ropelab._kernels",
            ["src/ropelab/_kernels.pyx"],
            include_dirs=[np.get_include()],
            extra_compile_args=["-O3"] + openmp,
            extra_link_args=openmp,
        ),
        compiler_directives={"language_level": 3},
    )

setup(ext_modules=ext_modules)
