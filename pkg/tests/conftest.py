import sys

import numpy as np
import pytest

from zefchan.codebook import Codebook
from zefchan.dmc import UniformStream, bec, bsc, identity_channel, z_channel


@pytest.fixture
def rng():
    return UniformStream(np.random.default_rng(12345))


@pytest.fixture
def channels():
    return {
        "identity": identity_channel(2),
        "bec03": bec(0.3),
        "bec05": bec(0.5),
        "bsc03": bsc(0.3),
        "z04": z_channel(0.4),
        "z05": z_channel(0.5),
    }


@pytest.fixture
def rep_code():
    return Codebook(2, [(0, 0), (1, 1)])


@pytest.fixture
def all_words_2():
    return Codebook(2, [(0, 0), (0, 1), (1, 0), (1, 1)])


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split("[")[1].split("]")[0])):
            terminalreporter.write_line(line)
