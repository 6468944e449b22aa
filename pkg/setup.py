"""Build script: compiles the optional Cython kernel extension.

The package works without the extension (pure-numpy fallback); the build
therefore tolerates a missing compiler and simply skips the extension.
"""
import os

import numpy as np
from setuptools import setup

_PYX = "src/drifttrack/_kernels_cy.pyx"

try:
    from Cython.Build import cythonize

    if os.path.exists(_PYX):
        ext_modules = cythonize(
            [_PYX],
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    else:
        ext_modules = []
except ImportError:
    ext_modules = []

setup(
    ext_modules=ext_modules,
    include_dirs=[np.get_include()],
)
