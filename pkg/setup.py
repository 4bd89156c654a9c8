import os

import numpy as np
from setuptools import Extension, setup

# The compiled core is optional: without Cython or a C compiler the package
# installs and runs on the pure-Python kernels.
ext_modules = []
if os.environ.get("PROJSA_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "projsa._core",
                    ["src/projsa/_core.pyx"],
                    include_dirs=[np.get_include()],
                    # no FMA contraction: results must match the Python kernels bit for bit
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
