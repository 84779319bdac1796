"""Build script for the optional compiled kernel backend.

Set VOXFUSE_SKIP_EXT=1 to install without compiling; the package then
falls back to the numpy kernels at import time.
"""

import os

import numpy as np
from setuptools import Extension, setup

extensions = []
if os.environ.get("VOXFUSE_SKIP_EXT", "0") != "1":
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "voxfuse.nn.kernels._ckernels",
                sources=["src/voxfuse/nn/kernels/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )

setup(ext_modules=extensions)
