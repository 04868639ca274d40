"""Shared fixtures: the canonical bare system and a generic dressed one."""

from __future__ import annotations

import pytest

from canard_lab.system_model import MonomialTable, SlowFastSystem


def make_generic():
    """A system with a1 != 0 and nonempty tables, for genericity checks.

    Every monomial satisfies the order conditions; coefficients are
    arbitrary but fixed so tests are reproducible.
    """
    table_f = MonomialTable({
        (1, 0, 1, 0, 0): 0.3,    # x z
        (0, 2, 0, 0, 0): -0.2,   # y^2
        (0, 0, 0, 1, 0): 0.1,    # eps
    })
    table_g = MonomialTable({
        (1, 0, 0, 0, 0): 0.4,    # x
        (0, 0, 2, 0, 0): -0.15,  # z^2
        (0, 1, 1, 0, 1): 0.2,    # y z mu
    })
    table_h = MonomialTable({
        (1, 0, 1, 0, 0): 0.25,   # x z
        (0, 0, 2, 0, 0): -0.1,   # z^2
        (0, 0, 0, 1, 0): 0.05,   # eps
        (1, 1, 0, 0, 0): 0.15,   # x y
    })
    return SlowFastSystem(a1=-0.3, a2=0.7, F=table_f, G=table_g, H=table_h)


@pytest.fixture(scope="session")
def canonical():
    """Bare normal form, a1 = 0, a2 = 1 (lam = 1)."""
    return SlowFastSystem.canonical()


@pytest.fixture(scope="session")
def generic():
    return make_generic()
