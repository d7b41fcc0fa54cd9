import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; ifit.kernels falls back
    cythonize = None

ext_modules = []
if cythonize is not None and not os.environ.get("IFIT_NO_EXT"):
    ext_modules = cythonize(
        [
            Extension(
                "ifit._ckernels",
                ["src/ifit/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
                language="c++",
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )

setup(ext_modules=ext_modules)
