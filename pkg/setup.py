from setuptools import setup, find_namespace_packages

setup(
    name="quantum_walk_chain",
    version="0.1.0",
    packages=find_namespace_packages(include=["src*"]),
    package_dir={"": "."},
    include_package_data=True,
    package_data={
        "src": ["data/*.json", "data/*.env"],
    },
    install_requires=[
        "numpy",
        "pandas",
        "python-dotenv",
    ],
    extras_require={
        "test": ["pytest", "jsonschema"],
    },
    entry_points={
        "console_scripts": [
            "qwc=src.app:main",
        ],
    },
)
