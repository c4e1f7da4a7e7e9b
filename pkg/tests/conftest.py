import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _quiet_warnings():
    # solver-internal alarms (leakage during ramp sweeps) are expected noise
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore", UserWarning)
        yield


@pytest.fixture
def rng():
    return np.random.default_rng(7)


def kron_chain(ops):
    out = ops[0]
    for o in ops[1:]:
        out = np.kron(out, o)
    return out


@pytest.fixture
def kron():
    return kron_chain
