import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "haptosim._kernels._core",
                ["src/haptosim/_kernels/_core.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    # Package still works without the compiled core: the numpy fallback
    # is selected at import time.
    extensions = []

setup(ext_modules=extensions)
