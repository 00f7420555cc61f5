import numpy as np
import pytest

from optbias.harness import ExperimentConfig, run_experiment


def spiked_panel(rng, p, n, q, strength=30.0, noise=1.0):
    """Random spiked data matrix ``B x + eps`` with well separated spikes."""
    B = rng.standard_normal((p, q)) * np.sqrt(strength * np.arange(q, 0, -1))
    return B, B @ rng.standard_normal((q, n)) + noise * rng.standard_normal((p, n))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def study(tmp_path_factory):
    """The desk-scale study: n=120, q=7, 200 trials at p = 500, 2000, 8000."""
    out = tmp_path_factory.mktemp("study")
    config = ExperimentConfig(p_list=(500, 2000, 8000), trials=200, output_dir=str(out))
    return run_experiment(config, figures=False)


# criterion number -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[int, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, detail = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
