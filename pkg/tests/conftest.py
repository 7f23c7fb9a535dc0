import numpy as np
import pytest

from fbftrack import (BasisConfig, ContinuousTransferFunction, HybridConfig,
                      discretize_zoh)

TS = 1e-3

# identified bench-printer axis models (coefficients in descending powers of s)
AXIS_X_NUM = [-62.48, 5.91e4, 3.82e6, 2.96e9, 1.96e11, 2.29e13]
AXIS_X_DEN = [1.0, 242.6, 1.36e5, 1.73e7, 4.22e9, 2.75e11, 2.29e13]
AXIS_Y_NUM = [-84.79, 2.87e4, -8.03e6, 6.45e9, 3.86e11, 3.29e14, 3.74e16]
AXIS_Y_DEN = [1.0, 211.2, 2.56e5, 4.11e7, 2.07e10, 2.39e12, 5.28e14, 3.74e16]


@pytest.fixture(scope="session")
def axis_x_tf():
    return ContinuousTransferFunction(AXIS_X_NUM, AXIS_X_DEN)


@pytest.fixture(scope="session")
def axis_x_model(axis_x_tf):
    return discretize_zoh(axis_x_tf, TS)


@pytest.fixture(scope="session")
def damped_tf():
    # well-damped second-order axis stand-in, unit DC gain
    w0 = 2 * np.pi * 120.0
    return ContinuousTransferFunction([w0 ** 2], [1.0, 2 * 0.8 * w0, w0 ** 2])


@pytest.fixture(scope="session")
def damped_model(damped_tf):
    return discretize_zoh(damped_tf, TS)


@pytest.fixture(scope="session")
def bench_basis_cfg():
    return BasisConfig(degree=5, knot_spacing=10, batch_len=70, window_len=140)


@pytest.fixture(scope="session")
def bench_hybrid_cfg():
    return HybridConfig(q=4, p=50, regularization=0.01, batch_len=70)


@pytest.fixture(scope="session")
def small_basis_cfg():
    return BasisConfig(degree=3, knot_spacing=5, batch_len=20, window_len=40)


@pytest.fixture(scope="session")
def small_hybrid_cfg():
    return HybridConfig(q=3, p=8, regularization=0.1, batch_len=20)
