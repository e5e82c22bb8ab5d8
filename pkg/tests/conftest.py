import numpy as np
import pytest

from fatigue_eeg.features import build_labeled_dataset
from fatigue_eeg.signal_io import SynthSpec, generate_synthetic


@pytest.fixture(scope="session")
def small_corpus():
    """Six 30 s recordings: quick enough for per-test training."""
    return generate_synthetic(SynthSpec(n_subjects=3, duration_s=30.0, seed=7))


@pytest.fixture(scope="session")
def small_dataset(small_corpus):
    return build_labeled_dataset(small_corpus, "TP7")


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


ACCEPTANCE_LINES = []


def record_criterion(number, ok, detail, status=None):
    status = status or ("PASS" if ok else "FAIL")
    ACCEPTANCE_LINES.append(f"[{status}] criterion {number}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
