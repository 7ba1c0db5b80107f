from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        "anonboot._kernels._native",
        ["src/anonboot/_kernels/_native.pyx"],
        libraries=["crypto"],
        define_macros=[("OPENSSL_SUPPRESS_DEPRECATED", "1")],
        extra_compile_args=["-O3", "-fopenmp"],
        extra_link_args=["-fopenmp"],
    )
]

setup(ext_modules=cythonize(extensions, language_level=3))
