import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # no Cython: the numpy fallback in cylstereo._core_py is used
    cythonize = None


extensions = [
    Extension(
        "cylstereo._core",
        sources=["src/cylstereo/_core.pyx"],
        include_dirs=[np.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        extra_compile_args=["-O3"],
        optional=True,
    ),
]

setup(
    ext_modules=cythonize(extensions, language_level="3") if cythonize else [],
    zip_safe=False,
)
