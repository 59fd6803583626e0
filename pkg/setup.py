"""Build the optional Cython reservoir kernel.

The extension is optional: when Cython or a C compiler is missing the
package installs anyway and ``rcbo`` falls back to the NumPy kernel.
"""
import os
import sys

from setuptools import setup
from setuptools.command.build_ext import build_ext

# fp-contract=off: FMA contraction would break bit-equality with the
# NumPy fallback and the naive reference loop.
extra = ["/O2"] if os.name == "nt" else ["-O2", "-ffp-contract=off"]


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: Cython kernel not built ({exc}); using NumPy fallback",
                  file=sys.stderr)

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            print(f"warning: failed to build {ext.name} ({exc})", file=sys.stderr)


def extensions():
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "rcbo._kernels",
        ["src/rcbo/_kernels.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=extra,
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
