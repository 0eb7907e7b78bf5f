"""Builds the pybind11 extension through the project's CMake tree."""

import os
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext):
        source_dir = Path(__file__).parent.resolve()
        # Directory that must end up containing mixreg/_core*.so.
        ext_path = Path(self.get_ext_fullpath(ext.name)).resolve()
        prefix = ext_path.parent.parent
        build_dir = Path(self.build_temp).resolve() / "cmake"

        configure = [
            "cmake",
            "-S", str(source_dir),
            "-B", str(build_dir),
            "-DCMAKE_BUILD_TYPE=Release",
            "-DMIXREG_WHEEL=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
        ]
        subprocess.run(configure, check=True)
        subprocess.run(
            ["cmake", "--build", str(build_dir), "-j", str(os.cpu_count() or 2)],
            check=True,
        )
        subprocess.run(
            ["cmake", "--install", str(build_dir), "--prefix", str(prefix)],
            check=True,
        )


setup(
    ext_modules=[CMakeExtension("mixreg._core")],
    cmdclass={"build_ext": CMakeBuild},
)
