import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

# python setup.py build_ext --inplace
extensions = [
    Extension(
        "folnerlab._ckernels",
        ["src/folnerlab/_ckernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3"],
        optional=True,  # the numpy fallback covers a failed build
    )
]

setup(ext_modules=cythonize(extensions, compiler_directives={"language_level": "3"}))
