import numpy as np
import pytest

from clstm_bearing.synth import SynthConfig, build_dataset

# Desk-scale corpus: 4.8 kHz keeps a 480-sample frame at 0.1 s.
DESK = dict(sample_rate_hz=4800, resonance_hz=1000.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def desk_cfg():
    return SynthConfig(clip_seconds=2.0, positions=2, **DESK)


@pytest.fixture(scope="session")
def desk_data(desk_cfg):
    return build_dataset(desk_cfg, frame_len=480, split_seed=0)


# -- acceptance report ------------------------------------------------------

_ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one pass/fail line per criterion; printed in the terminal summary."""
    def record(number, name, passed, detail=""):
        line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name}" + (f" ({detail})" if detail else "")
        _ACCEPTANCE.append((number, line))
        print(line)
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for _, line in sorted(_ACCEPTANCE, key=lambda item: item[0]):
            terminalreporter.write_line(line)


def pytest_addoption(parser):
    parser.addoption("--full-scale", action="store_true", help="run the slow full-scale smoke test")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--full-scale"):
        return
    skip = pytest.mark.skip(reason="full-scale run; enable with --full-scale")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)
