import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# GAPSCALE_NO_EXT=1 skips the compiled core; the package then runs on the numpy fallback.
BUILD_EXT = os.environ.get("GAPSCALE_NO_EXT", "0") != "1"
PYX = "src/gapscale/_kernels.pyx"
C_SRC = "src/gapscale/_kernels.c"


def kernel_extension(source):
    return Extension(
        "gapscale._kernels",
        [source],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )


extensions = []
if BUILD_EXT:
    if cythonize is not None:
        extensions = cythonize([kernel_extension(PYX)], compiler_directives={"language_level": "3"})
    elif os.path.exists(C_SRC):
        # pre-generated C source from the last cythonize run
        extensions = [kernel_extension(C_SRC)]

setup(ext_modules=extensions)
