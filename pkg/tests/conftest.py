import numpy as np
import pytest

from fdcr.analytic import FrameConfig, Scenario, rates
from fdcr.sensing import RadioParams, calibrated, db_to_linear, sensing_probs
from fdcr.traffic import TrafficModel


def base_radio(target_pf=0.01, chi=0.1):
    p = RadioParams(chi=chi, snr_ss=db_to_linear(10), snr_sp=db_to_linear(9), omega_s=6e6, t_s=1e-3,
                    eps_over_sigma2=1.0)
    return calibrated(p, target_pf)


@pytest.fixture
def radio():
    return base_radio()


@pytest.fixture
def traffic():
    return TrafficModel(0.1, 0.1)


def make_scenario(p_pf=0.1, p_pd=0.8, m=10, sensing=None, traffic=None, radio=None, **kw):
    radio = radio or base_radio()
    return Scenario(traffic=traffic or TrafficModel(0.1, 0.1), sensing=sensing or sensing_probs(radio),
                    p_pf=p_pf, p_pd=p_pd, frame=FrameConfig(m, radio.t_s), rates=rates(radio), **kw)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
CRITERIA: dict = {}


def record(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for k in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[k])
