from __future__ import annotations

import random

import pytest

from nnsig.field import Field


@pytest.fixture
def f5() -> Field:
    return Field(5)


@pytest.fixture
def f7() -> Field:
    return Field(7)


@pytest.fixture
def f257() -> Field:
    return Field(257)


def make_rng(seed: int = 0) -> random.Random:
    return random.Random(seed)
