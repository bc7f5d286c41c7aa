import numpy as np
import pytest

from thinsection.petro import Rock
from thinsection.synth import generate_corpus

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def corpus40(tmp_path_factory):
    """Seeded 40-image synthetic corpus, 10 per rock class."""
    out = tmp_path_factory.mktemp("corpus40")
    manifest, entries = generate_corpus({rock: 10 for rock in Rock}, seed=7, out_dir=out)
    return manifest, entries


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def exp2_report(corpus40):
    from thinsection.sweep import load_manifest, plan_experiment2, run_sweep

    manifest, _ = corpus40
    plan = plan_experiment2().with_corpus(load_manifest(manifest), manifest.parent)
    return run_sweep(plan, workers=2)
