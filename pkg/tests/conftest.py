import pytest

from freewalk.words import (
    FiniteCyclicFactor,
    FiniteTableFactor,
    GroupContext,
    IntegerFactor,
)
from freewalk.walks import DrivingMeasure, uniform_srw_measure


@pytest.fixture(scope="session")
def free2():
    return GroupContext((IntegerFactor("a"), IntegerFactor("b")))


@pytest.fixture(scope="session")
def free3():
    return GroupContext((IntegerFactor("a"), IntegerFactor("b"), IntegerFactor("c")))


@pytest.fixture(scope="session")
def z2z3():
    return GroupContext((FiniteCyclicFactor("x", 2), FiniteCyclicFactor("y", 3)))


@pytest.fixture(scope="session")
def z2z2():
    return GroupContext((FiniteCyclicFactor("x", 2), FiniteCyclicFactor("y", 2)))


def _s3_table():
    """Multiplication table of the symmetric group on three points."""
    import itertools

    perms = list(itertools.permutations(range(3)))
    index = {p: i for i, p in enumerate(perms)}

    def compose(p, q):  # apply q first, then p
        return tuple(p[q[i]] for i in range(3))

    # reorder so that the identity is element 0
    ident = (0, 1, 2)
    order = [ident] + [p for p in perms if p != ident]
    pos = {p: i for i, p in enumerate(order)}
    table = tuple(
        tuple(pos[compose(p, q)] for q in order) for p in order
    )
    transposition = pos[(1, 0, 2)]
    cycle = pos[(1, 2, 0)]
    return table, transposition, cycle


@pytest.fixture(scope="session")
def s3_factor():
    table, transposition, cycle = _s3_table()
    return FiniteTableFactor("s3", table, (("s", transposition), ("t", cycle)))


@pytest.fixture(scope="session")
def srw2(free2):
    return uniform_srw_measure(free2)


@pytest.fixture(scope="session")
def z2z3_nn(z2z3):
    third = 1.0 / 3.0
    return DrivingMeasure(
        (
            (z2z3.parse_word("x"), third),
            (z2z3.parse_word("y"), third),
            (z2z3.parse_word("y^2"), 1.0 - 2 * third),
        ),
        name="z2z3-nearest-neighbour",
    )
