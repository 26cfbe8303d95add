"""Builds the compiled extension through CMake during pip installs."""

import os
import shutil
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
        build_dir = Path(self.build_temp).resolve()
        build_dir.mkdir(parents=True, exist_ok=True)

        configure = [
            "cmake",
            "-S",
            str(source_dir),
            "-B",
            str(build_dir),
            "-DGAZEMARK_BUILD_TESTS=OFF",
            "-DGAZEMARK_BUILD_PYTHON=ON",
            f"-DPython3_EXECUTABLE={sys.executable}",
            f"-DCMAKE_BUILD_TYPE={'Debug' if self.debug else 'Release'}",
        ]
        subprocess.run(configure, check=True)
        subprocess.run(
            [
                "cmake",
                "--build",
                str(build_dir),
                "--target",
                "_core",
                "--parallel",
                str(os.cpu_count() or 2),
            ],
            check=True,
        )

        built = sorted((build_dir / "python" / "gazemark").glob("_core*.so"))
        if not built:
            raise RuntimeError("CMake build produced no _core module")
        destination = Path(self.get_ext_fullpath(ext.name)).resolve()
        destination.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[-1], destination)


setup(
    ext_modules=[CMakeExtension("gazemark._core")],
    cmdclass={"build_ext": CMakeBuild},
)
