import numpy as np
import pytest

from acfl import DeviceData, FederatedDataset


@pytest.fixture
def random_instance():
    """Factory for legal random instances with non-trivial labels."""

    def make(seed: int, n: int = 3, m: int = 10, d: int = 4, o: int = 2) -> FederatedDataset:
        rng = np.random.default_rng(seed)
        devices = []
        for _ in range(n):
            x = rng.uniform(-1.0, 1.0, (m, d))
            y = rng.uniform(-1.0, 1.0, (m, o))
            devices.append(DeviceData(x, y))
        return FederatedDataset(tuple(devices))

    return make
