"""Build hook for the optional compiled kernel.

Metadata lives in pyproject.toml. When Cython or a C compiler is missing
the package installs without the extension and ``pmorkit.kernels`` falls
back to the NumPy implementation.
"""

from setuptools import setup

ext_modules = []
try:
    import numpy as np
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("pmorkit._kernels", ["src/pmorkit/_kernels.pyx"],
                   include_dirs=[np.get_include()],
                   extra_compile_args=["-O3"])],
        compiler_directives={"language_level": "3"},
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
