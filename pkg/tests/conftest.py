import numpy as np
import pytest

from newsload.ingest import SyntheticSpec, generate_synthetic


def make_frame(n_days=10, start="2016-06-01", **kw):
    frame, _ = generate_synthetic(SyntheticSpec(n_days=n_days, start_date=start, **kw))
    return frame


@pytest.fixture
def frame10():
    return make_frame(10)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE = []


def record_criterion(number, title, passed, detail=""):
    """Remember one acceptance verdict for the end-of-session summary."""
    line = f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})"
    ACCEPTANCE.append((number, line))
    print(line)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(ACCEPTANCE):
        terminalreporter.write_line(line)
