from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "canard_lab._native",
                ["src/canard_lab/_native.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except ImportError:
    # The package still works without the compiled kernel: backend.py falls
    # back to the pure numpy implementation at import time.
    ext_modules = []

setup(ext_modules=ext_modules)
