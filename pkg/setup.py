import os

from setuptools import Extension, setup

# The compiled planner core is optional: OCTSEARCH_NO_EXT=1 skips it and the
# package falls back to the pure-Python twin at import time.
ext_modules = []
if os.environ.get("OCTSEARCH_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        extensions = [
            Extension(
                "octsearch._native",
                ["src/octsearch/_native.pyx"],
                extra_compile_args=["-O3"],
            )
        ]
        ext_modules = cythonize(
            extensions,
            compiler_directives={
                "language_level": 3,
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
                "initializedcheck": False,
            },
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
