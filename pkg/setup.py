"""Build script: compiles the optional fixed-point kernel.

The compiled extension is a pure speedup — clicksift falls back to the
bundled Python solver when the build is unavailable, with identical results.
A failed compile therefore downgrades to a warning instead of aborting the
install.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "clicksift._fixpoint",
                ["src/clicksift/_fixpoint.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    print("warning: Cython not available, building without the compiled fixed-point kernel")
    ext_modules = []

setup(ext_modules=ext_modules)
