from setuptools import find_packages, setup

setup(
    name="homoglab",
    version="0.1.0",
    description=(
        "Numerical homogenization of elliptic equations with singular drift "
        "and oscillating Neumann data on strips"
    ),
    long_description=open("README.md").read(),
    long_description_content_type="text/markdown",
    packages=find_packages(exclude=("tests",)),
    include_package_data=True,
    install_requires=[
        "numpy<2.0.0",
        "scipy>=1.12",
        "einops~=0.6.0",
        "rich==13.3.2",
        "pydantic~=2.0",
        "omegaconf~=2.3",
        "pandas>=1.5",
        "tabulate",
        "tqdm",
    ],
    extras_require={
        "dev": [
            "pytest~=7.2.1",
            "black==24.2.0",
            "pre-commit>=3.5.0",
            "flake8",
        ],
    },
    entry_points={
        "console_scripts": [
            "homoglab=homoglab.cli:main",
        ],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "License :: OSI Approved :: MIT License",
        "Operating System :: OS Independent",
    ],
    python_requires=">=3.9",
)
