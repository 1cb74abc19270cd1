import numpy as np
import pytest

from mdpreduce.core import FiniteMdp
from mdpreduce.models import build_inventory_mdp, build_remark1_mdp, fix_inv


def make_fix_a():
    return FiniteMdp.from_rows(["s0", "s1"], [["a0"], ["a0"]],
                               [[{"s1": 0.5}], [{"s1": 0.4}]], [[1.0], [2.0]])


@pytest.fixture
def fix_a():
    return make_fix_a()


@pytest.fixture
def fix_r1():
    return build_remark1_mdp([0.2, 0.4, 0.6])


@pytest.fixture(scope="session")
def fix_inv_mdp():
    return build_inventory_mdp(fix_inv())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def acceptance_log(request):
    lines = {}
    request.config._acceptance_lines = lines
    return lines


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = getattr(config, "_acceptance_lines", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines):
        terminalreporter.write_line(lines[key])
