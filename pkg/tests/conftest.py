import numpy as np
import pytest

from flywheel import DeviceParams, build_table


@pytest.fixture(scope="session")
def device():
    """Reference device at zero bias."""
    return DeviceParams.symmetric(0.0)


@pytest.fixture(scope="session")
def table_v0(device):
    """Coarse zero-bias coefficient table shared across tests."""
    return build_table(device, n_points=64)


@pytest.fixture(scope="session")
def table_v15(device):
    return build_table(device.at_voltage(15.0), n_points=64)


def constant_table(occupation=0.0, diffusion=0.0, damping=0.0, extent=400.0):
    """Table with constant coefficients, for frozen-coefficient runs."""
    from flywheel import CoefficientTable

    x = np.linspace(-extent, extent, 16)
    return CoefficientTable(
        x,
        np.full(16, occupation),
        np.full(16, diffusion),
        np.full(16, damping),
        params_fingerprint="constant",
    )
