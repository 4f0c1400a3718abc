"""Build script: compiles the optional GP kernel core.

The compiled extension is a pure accelerator; if the build fails (no C
compiler, missing Cython) the package still installs and falls back to the
numpy implementation at import time.
"""

import sys

from setuptools import setup
from setuptools.errors import CCompilerError, ExecError, PlatformError


def extensions():
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    # -ffast-math lets gcc vectorize the exp/log loops through libmvec,
    # which glibc does not link by default
    link_args = ["-lmvec", "-lm"] if sys.platform.startswith("linux") else []
    ext = Extension(
        "practicegp.gp._core",
        ["src/practicegp/gp/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3", "-ffast-math", "-march=native"],
        extra_link_args=link_args,
    )
    return cythonize(
        [ext],
        compiler_directives=dict(
            language_level=3, boundscheck=False, wraparound=False, cdivision=True
        ),
    )


try:
    setup(ext_modules=extensions())
except (CCompilerError, ExecError, PlatformError, ImportError) as exc:
    sys.stderr.write(f"compiled kernel core skipped ({exc}); using numpy fallback\n")
    setup()
