from __future__ import annotations

import numpy as np
import pytest

from catbn.network import Cpt, Network, Variable


@pytest.fixture
def two_node_net() -> Network:
    """Binary skill S with prior (0.6, 0.4); boolean question X with
    P(X=correct|S=1)=0.9, P(X=correct|S=2)=0.2.

    State 0 of X codes "correct" so the classic worked numbers hold:
    P(X=0) = 0.62, P(S=0|X=0) = 0.54/0.62.
    """
    s = Variable("S", 2, "skill")
    x = Variable("X", 2, "question", scale="boolean")
    return Network(
        (s, x),
        (
            Cpt("S", (), np.array([[0.6, 0.4]])),
            Cpt("X", ("S",), np.array([[0.9, 0.1], [0.2, 0.8]])),
        ),
    )


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20260809)
