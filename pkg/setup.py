import numpy as np
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/hymglue/_kernels.pyx",
        compiler_directives={"language_level": "3"},
    )
    for ext in ext_modules:
        ext.include_dirs.append(np.get_include())
        ext.extra_compile_args = ["-O3"]
except ImportError:
    # No Cython: install pure-Python only; hymglue.kernels falls back at import.
    ext_modules = []

setup(ext_modules=ext_modules)
