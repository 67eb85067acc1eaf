import pytest

from otrlab.attest import Vendor
from otrlab.contract import ModelRegistry
from otrlab.model_exec import ModelSpec

BIG = ModelSpec("llama3-70b", layer_count=80, ops_per_layer=8, theta_seed=70, cost_per_query=0.9)
SMALL = ModelSpec("llama3-8b", layer_count=32, ops_per_layer=8, theta_seed=8, cost_per_query=0.1)


@pytest.fixture(scope="session")
def vendor():
    return Vendor(b"test-vendor")


@pytest.fixture(scope="session")
def root(vendor):
    return vendor.root_of_trust()


@pytest.fixture
def registry(vendor):
    from otrlab.attest import measure_enclave

    reg = ModelRegistry()
    reg.register(BIG.model_id, measure_enclave(BIG.model_id, "v1"))
    return reg


@pytest.fixture(scope="session")
def specs():
    return {BIG.model_id: BIG, SMALL.model_id: SMALL}


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS):
        terminalreporter.write_line(line)
