import numpy as np
import pytest

from twmark.field import FieldParams, ProtocolCodecs


@pytest.fixture
def f7():
    return FieldParams(7)


@pytest.fixture
def fM61():
    return FieldParams()


@pytest.fixture
def codecs():
    return ProtocolCodecs()


@pytest.fixture
def rng():
    return np.random.default_rng(1234)
