import pytest

from faultconsult.domain import FaultLabel
from faultconsult.llm import OracleBackend
from faultconsult.synthgen import SynthConfig, generate_dataset, generate_machine


@pytest.fixture(scope="session")
def small_config():
    return SynthConfig(seed=0, n_per_class=1)


@pytest.fixture(scope="session")
def one_per_class(small_config):
    return generate_dataset(SynthConfig(seed=5, n_per_class=1))


@pytest.fixture(scope="session")
def overheating_machine(small_config):
    return generate_machine(42, FaultLabel.OVERHEATING, small_config)


@pytest.fixture(scope="session")
def oracle_backend(one_per_class):
    return OracleBackend.for_dataset(one_per_class)
