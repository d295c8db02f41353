import os

from setuptools import Extension, setup

# The compiled kernels are optional: without Cython or a C compiler the
# package still installs and falls back to the numpy implementations.
ext_modules = []
if os.environ.get("NETDEFENSE_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [
                Extension(
                    "netdefense._ckernels",
                    ["src/netdefense/_ckernels.pyx"],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )

setup(ext_modules=ext_modules)
