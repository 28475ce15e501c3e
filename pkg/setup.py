from setuptools import setup, find_packages

setup(
    name="swipt-fog",
    version="1.0.0",
    packages=find_packages(where="src"),
    package_dir={"": "src"},
    install_requires=[
        "numpy>=1.24",
        "scipy>=1.10",
        "pandas>=2.0",
        "python-dotenv==1.0.0",
        "pydantic==2.5.2",
    ],
    extras_require={
        "dev": [
            "pytest==7.4.3",
            "pytest-mock==3.12.0",
        ],
    },
    entry_points={
        "console_scripts": [
            "swipt-fog=swiptfog.cli:main",
        ],
    },
    python_requires=">=3.8",
)
