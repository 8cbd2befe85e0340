"""Build hook for the optional compiled tree-split kernel.

The package is fully functional without the extension: synthaudit.kernels
falls back to a vectorised numpy implementation with identical output.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "synthaudit.kernels._split_fast",
                ["src/synthaudit/kernels/_split_fast.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except ImportError:
    # No Cython in the build environment: install the pure-python package.
    pass

setup(ext_modules=ext_modules)
