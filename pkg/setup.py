"""Build configuration for the optional compiled sweep kernels.

The extension is optional: if Cython or a compiler is unavailable the
package installs without it and falls back to the pure-Python loops.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:  # pragma: no cover
    cythonize = None

ext_modules = []
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "spcrsvd._core",
                ["src/spcrsvd/_core.pyx"],
                extra_compile_args=["-O3"],
                optional=True,
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
