"""Builds the optional compiled solver kernel; the package falls back to pure Python without it."""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("MAGICSIM_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [Extension("magicsim._kernel", ["src/magicsim/_kernel.pyx"], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
