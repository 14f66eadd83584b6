"""Build script for the optional compiled ODE kernel.

The package is fully functional without the extension (a NumPy fallback is
selected at import time); building it just makes long integration batches
roughly an order of magnitude faster.
"""

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "patchepi._ode_cy",
                ["src/patchepi/_ode_cy.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
