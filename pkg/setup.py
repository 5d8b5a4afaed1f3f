from Cython.Build import cythonize
import numpy as np
from setuptools import Extension, setup

ext = Extension(
    "ucaris._kernels",
    ["src/ucaris/_kernels.pyx"],
    include_dirs=[np.get_include()],
    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
)

setup(ext_modules=cythonize([ext], compiler_directives={"language_level": "3"}))
