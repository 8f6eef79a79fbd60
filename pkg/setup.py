from setuptools import setup, find_packages

setup(
    name="ICPydags",
    version="0.1.0-dev",
    package_dir={"": "src"},
    packages=find_packages(where="src"),
    install_requires=[

    "numpy>=1.22,<3.0",
    "scipy>=1.8,<2.0",
    "polars>=1.0,<2.0",
    "networkx>=2.6,<4.0"

    ],
    extras_require={
        "test": ["pytest>=7.0", "hypothesis>=6.0"],
        "docs": ["sphinx", "sphinx-rtd-theme"],
    },
    entry_points={"console_scripts": ["icp = ICPydags.cli:main"]},
    python_requires='>=3.9',
    description="A NumPy-and-Polars-based Python implementation of a nonparametric prior over ordered directed acyclic graphs, with reversible-jump structure inference.",
    long_description=open('README.md').read(),
    long_description_content_type="text/markdown",
)
