"""Shared fixtures: session-scoped operators and decompositions.

Dense eigendecompositions at N=512 are the expensive shared ingredient of
many tests; build each once per session.
"""

from __future__ import annotations

import numpy as np
import pytest

from frachom import domain, local_op, spectral


@pytest.fixture(scope="session")
def grid_per_512():
    return domain.build_grid(1, 4.0, 512, "periodic")


@pytest.fixture(scope="session")
def grid_zero_512():
    return domain.build_grid(1, 4.0, 512, "zero-exterior")


@pytest.fixture(scope="session")
def dec_per_512(grid_per_512):
    coeff = domain.periodic_coefficient(domain.constant_profile(1.0), 1.0, grid_per_512)
    op = local_op.assemble_stiffness(grid_per_512, coeff)
    return spectral.decompose(op)


@pytest.fixture(scope="session")
def dec_zero_512(grid_zero_512):
    coeff = domain.periodic_coefficient(domain.constant_profile(1.0), 1.0, grid_zero_512)
    op = local_op.assemble_stiffness(grid_zero_512, coeff)
    return spectral.decompose(op)


@pytest.fixture()
def rng():
    return np.random.default_rng(20260821)
