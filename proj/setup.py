from glob import glob

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup

core_sources = sorted(s for s in glob("src/*.cpp"))

setup(
    ext_modules=[
        Pybind11Extension(
            "apfl._apfl",
            core_sources,
            include_dirs=["include", "vendor"],
            cxx_std=20,
        )
    ],
    cmdclass={"build_ext": build_ext},
)
