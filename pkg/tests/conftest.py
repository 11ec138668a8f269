import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _float_mode(monkeypatch):
    monkeypatch.delenv("SINET_MODE", raising=False)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
