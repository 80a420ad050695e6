"""Shared fixtures: designed tables are expensive, so cache them per session."""

from __future__ import annotations

import numpy as np
import pytest

from imvu import DesignSpec, design_mvu, enforce_anadromic

LN3 = float(np.log(3.0))

_CACHE: dict[tuple, object] = {}


def get_table(b_in: int, b_out: int, eps: float, symmetrize: bool = False):
    key = (b_in, b_out, round(eps, 12), symmetrize)
    if key not in _CACHE:
        table = design_mvu(DesignSpec(b_in=b_in, b_out=b_out, eps=eps))
        if symmetrize:
            table = enforce_anadromic(table)
        _CACHE[key] = table
    return _CACHE[key]


@pytest.fixture(scope="session")
def rr_table():
    """The one-bit randomized-response table at eps = ln 3."""
    return get_table(2, 2, LN3)


@pytest.fixture(scope="session")
def table_2x4():
    return get_table(2, 4, 1.0, symmetrize=True)


@pytest.fixture(scope="session")
def table_factory():
    return get_table
