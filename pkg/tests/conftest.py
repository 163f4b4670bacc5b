import math

import numpy as np
import pytest

from llap import (
    RealField,
    SymbolSpec,
    default_eta,
    make_grid,
    make_kernel,
    make_nonlinearity,
    sample,
)

SQRT_2PI = math.sqrt(2.0 * math.pi)


@pytest.fixture(scope="session")
def grid1():
    return make_grid(1, 20.0, 1024)


@pytest.fixture(scope="session")
def spec1(grid1):
    return SymbolSpec(shift=0.0, eta=default_eta(grid1, 0.0))


@pytest.fixture(scope="session")
def diff_kernel(grid1):
    return make_kernel(
        "difference",
        {"width1": 1.0, "width2": 2.0, "amplitude": 1.0, "shift": 0.0},
        grid1,
    )


@pytest.fixture(scope="session")
def gauss_kernel(grid1):
    return make_kernel("gaussian", {"width": 1.0, "amplitude": 1.0}, grid1)


@pytest.fixture(scope="session")
def bump_offset(grid1):
    return sample(grid1, lambda x: 0.3 * np.exp(-(x**2) / 2.0))


@pytest.fixture(scope="session")
def sine_nonlinearity(grid1, bump_offset):
    return make_nonlinearity("saturating_sine", lip=0.1, offset=bump_offset)


@pytest.fixture(scope="session")
def zero_offset_nonlinearity(grid1):
    return make_nonlinearity("saturating_sine", lip=0.1, offset=RealField.zeros(grid1))


def l2_gap(a: RealField, b: RealField) -> float:
    from llap import norms

    return norms(RealField(a.values - b.values, a.grid)).l2
