import os

import numpy as np
from setuptools import Extension, setup

# MVEMPIRICAL_NO_EXT=1 skips the compiled core; the package then runs on the
# pure-Python kernels.
ext_modules = []
if not os.environ.get("MVEMPIRICAL_NO_EXT"):
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "mvempirical._kernels",
                ["src/mvempirical/_kernels.pyx"],
                include_dirs=[np.get_include()],
                # no FMA contraction: the compiled and Python kernels must agree bit for bit
                extra_compile_args=["-O2", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
