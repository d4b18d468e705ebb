from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = cythonize(
    [Extension("cabasim._kernels", ["src/cabasim/_kernels.pyx"])],
    compiler_directives={"language_level": 3},
)

setup(ext_modules=ext_modules)
