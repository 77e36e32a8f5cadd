"""Setup."""

from setuptools import setup, find_packages

inst_reqs = [
    "backoff >= 2.2",
    "click >= 8.1, < 8.2",
    "jinja2 >= 3.1",
    "lxml >= 4.9",
    "numpy >= 1.24",
    "python-dotenv >= 1.0",
    "pyyaml >= 6.0",
    "requests",
    "schematics >= 2.1.1",
    "semver >= 3.0",
]
extra_reqs = {
    "bpe": ["tiktoken"],
    "test": ["pytest", "factory-boy", "Faker"],
}

setup(
    name="reta",
    version="0.1.0",
    description=u"Retrieval-augmented question answering over PubMed Central, with an evaluation harness",
    python_requires=">=3.8",
    keywords="retrieval-augmented-generation pubmed-central llm-evaluation",
    packages=find_packages(exclude=["ez_setup", "examples", "tests"]),
    package_data={"reta": ["templates/*.j2", "data/*.json", "data/*.jsonl"]},
    include_package_data=True,
    zip_safe=False,
    install_requires=inst_reqs,
    extras_require=extra_reqs,
    entry_points={"console_scripts": ["reta = reta.cli:main"]},
)
