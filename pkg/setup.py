"""Build script: compiles the optional accelerator extension.

The package is fully functional without the extension (a numpy fallback is
selected at import time); the build therefore tolerates a missing compiler.
"""
import sys

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "qdlab._kernels._accel",
                ["src/qdlab/_kernels/_accel.pyx"],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    print(f"qdlab: skipping accelerator extension ({exc})", file=sys.stderr)

try:
    setup(ext_modules=ext_modules)
except Exception as exc:  # pragma: no cover
    print(
        f"qdlab: extension build failed ({exc}); installing pure-python build",
        file=sys.stderr,
    )
    setup(ext_modules=[])
