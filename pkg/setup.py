from setuptools import setup, Extension
from Cython.Build import cythonize
import numpy as np

# -ffp-contract=off keeps the compiled kernel bit-identical to the numpy
# fallback (no fused multiply-add reassociation).
ext = Extension(
    "gprinv.fdtd._kernel",
    ["src/gprinv/fdtd/_kernel.pyx"],
    include_dirs=[np.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize(ext, language_level="3"))
