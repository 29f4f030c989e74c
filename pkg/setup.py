"""Build script: compiles the optional Cython kernel extension.

The extension is best-effort -- if Cython or a C compiler is missing the
package installs anyway and sccnn.kernels falls back to scipy.sparse.
"""

import numpy
from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/sccnn/_kernels.pyx",
        compiler_directives={
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "language_level": 3,
        },
    )
    for ext in ext_modules:
        ext.include_dirs.append(numpy.get_include())
        # -O3 only: no -ffast-math, so accumulation order (and therefore the
        # bit pattern of every result) matches the scipy fallback exactly.
        ext.extra_compile_args = ["-O3"]
except Exception:  # pragma: no cover - exercised only without a toolchain
    ext_modules = []

setup(ext_modules=ext_modules)
