"""Build the optional Cython kernels.

The package works without them: ``shipbow.kernels`` falls back to the pure
Python implementations when the extension is missing.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("SHIPBOW_NO_EXT", "") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension(
                    "shipbow._ckernels",
                    ["src/shipbow/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
