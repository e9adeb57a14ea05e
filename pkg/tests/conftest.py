import numpy as np
import pytest

from helpers import T1_CSV, T1_GROUP, T1_IDS, T1_SCORES, T1_Z
from sismon import Pool, build_categorical_strata, build_proposal


@pytest.fixture
def t1_pool():
    return Pool(T1_IDS, T1_SCORES, [0] * 6, T1_Z, {"stratum": np.array(T1_GROUP, dtype=object)})


@pytest.fixture
def t1_strat(t1_pool):
    return build_categorical_strata(t1_pool, "stratum")


@pytest.fixture
def t1_prop(t1_pool):
    return build_proposal(t1_pool, alpha=1.0)


@pytest.fixture
def t1_csv(tmp_path):
    path = tmp_path / "t1.csv"
    path.write_text(T1_CSV)
    return path


def pytest_terminal_summary(terminalreporter):
    import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)
