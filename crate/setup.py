"""Builds the nashcut_py extension module by delegating to cargo.

No Rust-specific build backend is assumed; the extension is compiled with
`cargo build --release -p nashcut-py --features extension-module` and the
resulting cdylib is copied to wherever setuptools expects the module.
"""

import pathlib
import shutil
import subprocess
import sys

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext

ROOT = pathlib.Path(__file__).resolve().parent


class CargoBuildExt(build_ext):
    def build_extension(self, ext):
        subprocess.check_call(
            [
                "cargo",
                "build",
                "--release",
                "-p",
                "nashcut-py",
                "--features",
                "extension-module",
            ],
            cwd=ROOT,
        )
        if sys.platform == "darwin":
            built = ROOT / "target" / "release" / "libnashcut_py.dylib"
        elif sys.platform == "win32":
            built = ROOT / "target" / "release" / "nashcut_py.dll"
        else:
            built = ROOT / "target" / "release" / "libnashcut_py.so"
        dest = pathlib.Path(self.get_ext_fullpath(ext.name))
        dest.parent.mkdir(parents=True, exist_ok=True)
        shutil.copyfile(built, dest)


setup(
    ext_modules=[Extension("nashcut_py", sources=[])],
    cmdclass={"build_ext": CargoBuildExt},
)
