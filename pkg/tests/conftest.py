import numpy as np
import pytest

import sl3flows as sf
from sl3flows import sampling


@pytest.fixture(scope="session")
def cfg_fast():
    return sf.IntegratorConfig(step=5e-3)


@pytest.fixture(scope="session")
def cfg_coarse():
    return sf.IntegratorConfig(step=1e-2)


@pytest.fixture(scope="session")
def transfer_w():
    return sf.parse_field("0.05*sin(m12+m13)")


@pytest.fixture(scope="session")
def perturbation(transfer_w):
    return sf.from_transfer(transfer_w, sf.frame_element("E12"))


@pytest.fixture(scope="session")
def trivial_perturbation():
    return sf.from_transfer(sf.parse_field("0"), sf.frame_element("E12"))


@pytest.fixture(scope="session")
def box_samples():
    return sampling.default_samples(200)


@pytest.fixture(scope="session")
def base_points():
    return sampling.sample_points(10, box=0.4, seed=101)


@pytest.fixture(scope="session")
def base_point(base_points):
    return base_points[0]
