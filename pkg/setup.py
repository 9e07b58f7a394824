import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# -ffp-contract=off: the compiled kernels must be bit-identical to the pure
# Python fallback, so FMA contraction of a*b+c is not allowed.
extensions = [
    Extension(
        "cogx.kernels._grid_core",
        ["src/cogx/kernels/_grid_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

if cythonize is not None:
    ext_modules = cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
else:
    # No Cython: install the pure-Python package; the fallback kernels are
    # selected automatically at import.
    ext_modules = []

setup(ext_modules=ext_modules)
