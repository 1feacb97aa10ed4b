from setuptools import setup, find_packages

setup(
    name="glassbox",
    version="0.1.0",
    description="Transparent l-diversity anonymization toolkit with a built-in reverse-engineering adversary",
    long_description=open("README.md", encoding="utf-8").read(),
    long_description_content_type="text/markdown",
    author="Glassbox Team",
    license="Apache-2.0",
    python_requires=">=3.9",
    packages=find_packages(include=["src", "src.*", "config", "config.*"]),
    install_requires=[
        "numpy>=1.24.0",
        "pandas>=2.1.0",
        "pydantic>=2.5.0",
        "pydantic-settings>=2.1.0",
        "python-dotenv>=1.0.0",
        "tqdm>=4.66.0",
    ],
    extras_require={
        "dev": ["pytest", "hypothesis", "black", "ruff"],
        "bench": ["matplotlib"],
    },
    entry_points={
        "console_scripts": ["glassbox=src.anonymization.cli:main"],
    },
    classifiers=[
        "Development Status :: 3 - Alpha",
        "Intended Audience :: Science/Research",
        "License :: OSI Approved :: Apache Software License",
        "Programming Language :: Python :: 3.9",
        "Topic :: Security",
    ],
)
