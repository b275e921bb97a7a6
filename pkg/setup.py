from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "amosim._core",
        ["src/amosim/_core.pyx"],
        language="c++",
        extra_compile_args=["-O2", "-std=c++17"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
    )
)
