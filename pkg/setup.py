"""Build script: compiles the optional bit-kernel extension when Cython is present.

The package works without the extension; revaudit._bitkit falls back to the
pure-Python kernel at import time.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/revaudit/_bitkit/_fast.pyx"],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
