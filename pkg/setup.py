"""setuptools configuration for the polyalab command."""

import sys

from setuptools import setup

VERSION = "0.1.0"

if sys.version_info < (3, 9):
    sys.exit("Python 3.9 or higher is required")

setup(
    name="PolyaLab",
    version=VERSION,
    description="Total-positivity experiments on Polya frequency functions",
    python_requires=">=3.9",
    py_modules=[
        "PolyaLab",
        "errors",
        "numerics_core",
        "pf_densities",
        "preserver_lab",
        "reports",
        "settings",
        "symfunc",
        "tp_check",
    ],
    install_requires=["mpmath>=1.3,<2"],
    entry_points={"console_scripts": ["polyalab=PolyaLab:run"]},
)
