from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

import itmor

MODELS_DIR = Path(__file__).resolve().parent.parent / "models"
GOLDEN_DIR = Path(__file__).resolve().parent / "golden"

settings.register_profile(
    "suite",
    max_examples=50,
    deadline=None,
    derandomize=True,
    suppress_health_check=[HealthCheck.filter_too_much],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def two_timescale() -> itmor.LinearGaussianModel:
    return itmor.load_model_file(MODELS_DIR / "two_timescale.json")


@pytest.fixture(scope="session")
def four_state() -> itmor.LinearGaussianModel:
    return itmor.load_model_file(MODELS_DIR / "four_state.json")


@pytest.fixture(scope="session")
def tt_params(two_timescale) -> itmor.DecoupledParams:
    return itmor.DecoupledParams.from_model(two_timescale)
