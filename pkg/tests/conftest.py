import numpy as np
import pytest

from facemotion.synth import generate_synthetic, write_synthetic_manifest


@pytest.fixture(scope="session")
def small_synth():
    """Prototype-based synthetic data, 6 records per class."""
    return generate_synthetic(n_per_class=6, noise_sigma=0.05, seed=3)


@pytest.fixture(scope="session")
def synth_manifest(tmp_path_factory):
    """Rendered sequences (2 per class, situation 17) with a small CV setting."""
    root = tmp_path_factory.mktemp("manifest")
    return write_synthetic_manifest(str(root), n_per_class=2, seed=1,
                                    extra={"cv": {"folds": 2, "repeats": 2},
                                           "trainers": ["discriminant", "entropy"]})


@pytest.fixture
def gen():
    return np.random.Generator(np.random.PCG64(1234))


ACCEPTANCE_LINES: list = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
