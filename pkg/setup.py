import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = cythonize(
    Extension(
        "qsat._ckernels",
        ["src/qsat/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"] if os.name != "nt" else [],
    ),
    compiler_directives={"language_level": "3"},
)

setup(ext_modules=extensions)
