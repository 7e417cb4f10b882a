import numpy as np
import pytest

from facekit.dataset import stratified_split, synth_dataset

ACCEPTANCE_RESULTS = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def separable():
    ds = synth_dataset(6, 6, shape=(10, 8), class_sep=2.0, noise=0.05, seed=3)
    return ds, stratified_split(ds, 3, 3, seed=1)


@pytest.fixture(scope="session")
def hard():
    """Overlapping classes: single classifiers disagree, so voting matters."""
    ds = synth_dataset(10, 8, shape=(12, 10), class_sep=0.12, noise=0.3, seed=11)
    return ds, stratified_split(ds, 4, 4, seed=2)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, name, ok, detail in sorted(ACCEPTANCE_RESULTS):
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] {number}. {name}: {detail}")
