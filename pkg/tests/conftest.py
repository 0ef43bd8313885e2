import numpy as np
import pytest

from parbuck.model import BankParams

# Two-converter test bench: 2.83 mH / 1.3 mH coils, 22 mF bus capacitor,
# 24 V sources, 12 V bus reference (264 mC).
BENCH_L = [2.83e-3, 1.3e-3]
BENCH_C = 22e-3
BENCH_E = [24.0, 24.0]
BENCH_QR = 0.264
BENCH_VR = 12.0

# total conduction-loss cost of the bench (quadratic in flux)
LOSS_K1 = [0.1623e5, 1.8343e5]
LOSS_K2 = [130.7, 27.7]


@pytest.fixture
def bench():
    return BankParams(L=BENCH_L, C=BENCH_C, R=20.0, E=BENCH_E)


@pytest.fixture
def bench_esr():
    return BankParams(L=BENCH_L, C=BENCH_C, R=20.0, E=BENCH_E, r=[0.1, 0.1])


@pytest.fixture
def unit_params():
    return BankParams(L=[1.0, 1.0], C=1.0, R=1.0, E=[1.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
