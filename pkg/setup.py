import setuptools

with open("README.md", "r", encoding="utf-8") as fh:
    long_description = fh.read()

extras_require = {
    "test": [
        "pytest >=6",
    ],
}

extras_require["dev"] = [
    *extras_require["test"],
    "black",
    "flake8 >=3.9.1",
    "mypy >=0.910",
    "pre-commit >=2.15.0",
]

extras_require["all"] = sorted(set(sum(extras_require.values(), [])))

setuptools.setup(
    name="hdapprox",
    version="0.1.0",
    description="Laplace and saddlepoint density approximations with growing dimension, "
    "with exact and Monte Carlo oracles for measuring their error.",
    long_description=long_description,
    long_description_content_type="text/markdown",
    package_dir={"": "src"},
    packages=setuptools.find_packages(where="src"),
    python_requires=">=3.7",
    install_requires=["numpy >=1.18.0", "scipy >=1.4", "pandas >=1.2.4"],
    extras_require=extras_require,
    entry_points={"console_scripts": ["hdapprox=hdapprox.cli:main"]},
)
