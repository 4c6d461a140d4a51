import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from literoute import ClassTaxonomy, SynthSpec, synth_generate, validate_taxonomy


@pytest.fixture
def binary_taxonomy():
    return validate_taxonomy(ClassTaxonomy(("benign", "malignant"), {0}, {1}, {1}))


@pytest.fixture
def three_class_taxonomy():
    # two safe classes, one danger/malignant
    return validate_taxonomy(ClassTaxonomy(("a", "b", "m"), {0, 1}, {2}, {2}))


@pytest.fixture(scope="session")
def small_synth():
    return synth_generate(SynthSpec(seed=3, n_samples=300, n_classes=4, n_localisations=4, n_subgroups=2,
                                    lite_dim=6, heavy_dim=8))


@pytest.fixture
def small_run_config(tmp_path):
    return {
        "dataset": {"synth": {"seed": 3, "n_samples": 300, "n_classes": 4, "n_localisations": 4,
                              "n_subgroups": 2, "lite_dim": 6, "heavy_dim": 8}},
        "k": 3,
        "seed": 1,
        "fusion": {"epochs": 80},
        "output_dir": str(tmp_path / "out"),
    }


# acceptance lines collected by test_acceptance.py, echoed after the run
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
