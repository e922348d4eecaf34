import os

import numpy
from setuptools import Extension, setup

# The extension is optional: without Cython or a compiler the package
# installs with its numpy fallback.
ext_modules = []
if not os.environ.get("ALSC_NO_EXTENSION"):
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension(
                "alsc._ckernels",
                ["src/alsc/_ckernels.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )],
            compiler_directives={"language_level": 3},
        )

setup(ext_modules=ext_modules)
