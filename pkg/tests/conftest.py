import os
from pathlib import Path

import numpy as np
import pytest

from portanet import engine
from portanet.data import mnist_paths, write_mnist_dir

HELD_OUT = 1000


def _mnist_source_dir(tmp_factory):
    """Directory with train/t10k IDX files.

    ``PORTANET_MNIST_DIR`` points at a full MNIST download. Without it, the
    5000-image sample that ships with mlxtend is split 4000/1000.
    """
    env = os.environ.get("PORTANET_MNIST_DIR")
    if env:
        if not all(p.exists() for p in mnist_paths(env, "train") + mnist_paths(env, "test")):
            pytest.fail(f"PORTANET_MNIST_DIR={env} does not hold the four MNIST IDX files")
        return Path(env)
    try:
        from mlxtend.data import mnist_data
    except ImportError:
        return None
    x, y = mnist_data()
    out = tmp_factory.mktemp("mnist")
    write_mnist_dir(out, x.astype(np.uint8).reshape(-1, 28, 28), y, test_count=HELD_OUT)
    return out


@pytest.fixture(scope="session")
def mnist_dir(tmp_path_factory):
    d = _mnist_source_dir(tmp_path_factory)
    if d is None:
        pytest.skip("no MNIST data: set PORTANET_MNIST_DIR or install mlxtend")
    return d


@pytest.fixture(scope="session")
def mnist(mnist_dir):
    """(train set, 1000-image held-out set)."""
    from portanet.data import load_split
    train = load_split("mnist", mnist_dir, "train")
    test = load_split("mnist", mnist_dir, "test").subset(0, HELD_OUT)
    return train, test


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(autouse=True)
def _sequential_policy():
    # every test starts from the default policy, whatever the previous one did
    engine.set_policy(engine.Policy.sequential())
    yield
    engine.set_policy(engine.Policy.sequential())


# -- acceptance summary ----------------------------------------------------

_acceptance: list[tuple[str, str]] = []


def pytest_runtest_logreport(report):
    if "test_acceptance.py" not in report.nodeid:
        return
    if report.when == "call" or (report.when == "setup" and report.outcome != "passed"):
        name = report.nodeid.split("::")[-1]
        _acceptance.append((name, report.outcome.upper()))


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for name, outcome in _acceptance:
        verdict = "PASS" if outcome == "PASSED" else "FAIL" if outcome == "FAILED" else outcome
        terminalreporter.write_line(f"{verdict:5s} {name}")
