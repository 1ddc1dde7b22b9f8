import functools
from importlib import resources

import pytest

from itscost import analyze_ts, parse_its

CORPUS = ["aaron3", "conditional", "countdown", "lexicographic", "nested", "nonterm",
          "ring", "sequential", "straight", "two_phase"]


def fixture_text(name):
    return resources.files("itscost").joinpath("fixtures", f"{name}.its").read_text()


def fixture_path(name):
    return str(resources.files("itscost").joinpath("fixtures", f"{name}.its"))


@functools.lru_cache(maxsize=None)
def load(name):
    return parse_its(fixture_text(name))


@functools.lru_cache(maxsize=None)
def report(name):
    return analyze_ts(load(name))


@pytest.fixture(scope="session")
def aaron3():
    return load("aaron3")


@pytest.fixture(scope="session")
def aaron3_report():
    return report("aaron3")
