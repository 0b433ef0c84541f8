import pytest

from autoresonance.resonance import SystemParams, simulate


@pytest.fixture(scope="session")
def reference_params():
    return SystemParams(beta=0.05, f=1.0)


@pytest.fixture(scope="session")
def reference_run(reference_params):
    """f=1, beta=0.05, psi(0)=0 over tau in [0, 600]; shared by several modules."""
    return simulate(reference_params, 0j, (0.0, 600.0))
