import os

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None


def extensions():
    if cythonize is None or os.environ.get("CWLEARN_PURE"):
        return []
    ext = Extension(
        "cwlearn._ckernel",
        sources=["src/cwlearn/_ckernel.pyx"],
        optional=True,
    )
    return cythonize([ext], language_level="3")


setup(ext_modules=extensions())
