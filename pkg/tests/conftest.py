import numpy as np
import pytest
from hypothesis import settings

from ris_mimo import rng as rngmod
from ris_mimo.channel_model import Scenario, sample_large_scale

settings.register_profile("default", deadline=None, max_examples=50)
settings.load_profile("default")


def make_scenario(**kw):
    base = dict(M=16, N=8, L=2, K=4, seed=7)
    base.update(kw)
    return Scenario(**base)


def make_large_scale(seed=3, **kw):
    sc = make_scenario(**kw)
    return sc, sample_large_scale(sc, rngmod.stream(seed, 0, rngmod.LARGE_SCALE))


@pytest.fixture
def rng():
    return rngmod.stream(12345, 99)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
