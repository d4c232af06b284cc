"""Shared fixtures: cached control data per scenario and the acceptance log."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import settings

from stratretract import controldata as cdm
from stratretract.scenarios import get_scenario
from stratretract.strata import Stratum

settings.register_profile("default", deadline=None, max_examples=40)
settings.load_profile("default")

ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def acceptance_log():
    return ACCEPTANCE_LINES


_TANG: dict = {}
_COMM: dict = {}


def tangential(name: str):
    if name not in _TANG:
        _TANG[name] = cdm.build_tangential(get_scenario(name))
    return _TANG[name]


def commutative(name: str):
    if name not in _COMM:
        _COMM[name] = cdm.build_commutative(get_scenario(name), base=tangential(name))
    return _COMM[name]


def verified(name: str, samples: int = 60):
    """Commutative data with all verifier flags set (small sample counts)."""
    _, cd = cdm.verify_all(commutative(name), samples=samples)
    return cd


@pytest.fixture(scope="session")
def flag3_comm():
    return commutative("FLAG3")


@pytest.fixture(scope="session")
def flag3_verified():
    return verified("FLAG3")


def origin_stratum(n: int = 2) -> Stratum:
    """The point {0} in R^n, with the identity chart."""
    from stratretract.scenarios import _radial_chart

    chart = _radial_chart(n, 0)
    return Stratum(
        id="N",
        dim=0,
        residual=lambda p: np.asarray(p, dtype=float),
        exclude=lambda p: False,
        sampler=lambda rng, k: np.zeros((k, n)),
        chart_for=lambda p: chart,
    )
