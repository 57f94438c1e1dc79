"""Build hook: compiles the optional fast-path extension.

The package works without the extension (a numpy implementation is selected
at import time), so a failed compile only costs speed, not correctness.
"""

from setuptools import Extension, setup

try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "phibvp._fastpath",
                ["src/phibvp/_fastpath.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception:  # pragma: no cover - build machinery absent
    extensions = []

setup(ext_modules=extensions)
