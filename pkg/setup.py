import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pure-Python install; ll0.kernels falls back
    ext_modules = []
else:
    ext_modules = cythonize(
        [
            Extension(
                "ll0._ckernels",
                ["src/ll0/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
