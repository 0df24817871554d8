"""Builds the optional compiled simulation kernel.

If Cython or a C compiler is missing, the package installs without it and the
pure-Python kernel is used instead.
"""

import os
import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class OptionalBuildExt(build_ext):
    def run(self):
        try:
            super().run()
        except (PlatformError, OSError) as exc:
            warnings.warn(f"compiled kernel not built ({exc}); using the pure-Python kernel")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, OSError) as exc:
            warnings.warn(f"compiled kernel not built ({exc}); using the pure-Python kernel")


ext_modules = []
if not os.environ.get("SELFISHSCHED_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "selfishsched._simkernel",
                    ["src/selfishsched/_simkernel.pyx"],
                    extra_compile_args=["-O2", "-ffp-contract=off"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules, cmdclass={"build_ext": OptionalBuildExt})
