import io
import re

from collections import OrderedDict
from setuptools import setup, find_packages


with open("README.md") as f:
    readme = f.read()

with io.open("panopyr/__init__.py", "rt") as f:
    version = re.search(r"__version__ = \"(.*?)\"", f.read()).group(1)

setup(
    name="panopyr",
    version=version,
    url="https://github.com/jucyai/panopyr",
    project_urls=OrderedDict(
        (
            ("Code", "https://github.com/jucyai/panopyr"),
            ("Issue tracker", "https://github.com/jucyai/panopyr/issues"),
        )
    ),
    license="MIT",
    author="Jiachen Yao",
    maintainer="Jiachen Yao",
    description="Bottom-up panoptic segmentation with pyramidal fusion, from targets to metrics",
    long_description_content_type="text/markdown",
    long_description=readme,
    packages=find_packages(exclude=["tests", "docs"]),
    include_package_data=True,
    python_requires=">=3.8",
    install_requires=[
        "numpy>=1.20.0",
        "pandas>=1.1.0",
        "scipy>=1.5.0",
        "Pillow>=8.0.0",
    ],
    entry_points={"console_scripts": ["panopyr=panopyr.workbench.cli:main"]},
    classifiers=[
        "Intended Audience :: Developers",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
        "Programming Language :: Python",
        "Programming Language :: Python :: 3.8",
        "Programming Language :: Python :: 3.9",
        "Topic :: Scientific/Engineering :: Image Recognition",
    ],
)
