from setuptools import setup, find_packages
from pseudomarket import __version__


with open("README.md", "r") as longdesc:
    long_description = longdesc.read()

required_packages = [
    "numpy==1.26.4",
]

setup(
    name="pseudomarket",
    version=__version__,
    description=(
        "Simulation and optimization toolkit for credit-based allocation of"
        " reusable resources"
    ),
    long_description=long_description,
    long_description_content_type="text/markdown",
    license="GPL-3.0 license",
    keywords=(
        "pseudo-market artificial currency first-price auction reserve price"
        " reusable resources monte carlo"
    ),
    packages=find_packages(exclude=["tests", "tests.*"]),
    python_requires=">=3.9",
    install_requires=required_packages,
    entry_points={
        "console_scripts": ["pseudomarket=pseudomarket.cli:main"],
    },
)
