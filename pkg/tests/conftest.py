import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from alsc import features, synth  # noqa: E402


@pytest.fixture(scope="session")
def small_scene():
    """Five-class scene on a 60 m square (about 22k points)."""
    return synth.generate(synth.five_class_scene(seed=3, size=60.0))


@pytest.fixture(scope="session")
def small_features(small_scene):
    specs = features.uniform_specs(2.0)
    return features.feature_table(small_scene, features.build_index(small_scene, specs), specs)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


_ACCEPTANCE: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)
