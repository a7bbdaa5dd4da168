import setuptools

with open("README.md", "r") as fh:
    long_description = fh.read()

setuptools.setup(
    name="python-mimoray",
    version="0.1.0",
    author="Nathan Shearer",
    author_email="shearern@gmail.com",
    description="Ray-traced MIMO radar imaging simulator",
    long_description=long_description,
    long_description_content_type="text/markdown",
    packages=setuptools.find_packages(exclude=["tests"]),
    install_requires=[
        "numpy>=1.20",
        "scipy>=1.6",
        "PyYAML>=5.1",
        "joblib>=1.0",
        "tqdm>=4.0",
    ],
    entry_points={
        "console_scripts": [
            "mimoray=mimoray.cli:main",
        ],
    },
    classifiers=[
        "Programming Language :: Python :: 3",
        "Operating System :: OS Independent",
    ],
    python_requires='>=3.8',
)
