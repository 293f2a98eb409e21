"""Build the optional compiled 1D kernel; the package works without it."""
from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
except ImportError:
    pass
else:
    ext_modules = cythonize(
        [Extension("hdg_helmholtz._hdg1d", ["src/hdg_helmholtz/_hdg1d.pyx"],
                   include_dirs=[numpy.get_include()], optional=True,
                   define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")])],
        compiler_directives={"language_level": 3})

setup(ext_modules=ext_modules)
