import pytest
from hypothesis import given, strategies as st

from hykeep.darboux import (
    BudgetExceeded, DarbouxPair, enumerate_cofactors, first_integrals, integer_nullspace,
    search, verify,
)
from hykeep.dynamics import STATE_VARS, plant_field
from hykeep.poly import Polynomial

P = Polynomial.parse
F1 = plant_field(1)
FH = plant_field("-h")


def _has(pairs, p, c):
    # cofactors are invariant under scaling p
    p, c = P(p).monic(), P(c)
    return any(pr.p.monic() == p and pr.cofactor == c for pr in pairs)


def test_cofactor_grid():
    grid = enumerate_cofactors(2, range(-2, 3), 2)
    for c in ("g*e", "2*g*e", "g*e - g"):
        assert P(c) in grid
    assert Polynomial() in grid
    assert len(enumerate_cofactors(1, {0, 1}, 1)) == 4


def test_cofactor_cap():
    with pytest.raises(BudgetExceeded):
        enumerate_cofactors(4, range(-5, 6), 4, cap=1000)


def test_search_constant_mode():
    pairs = search(F1, 2, 2)
    assert _has(pairs, "e", "g*e")
    assert _has(pairs, "1 + 2*e*h", "2*g*e")


def test_search_proportional_mode():
    pairs = search(FH, 1, 2)
    assert _has(pairs, "e", "g*e")
    assert _has(pairs, "h", "g*e - g")


@pytest.mark.parametrize("f", [F1, FH])
def test_search_all_variables_finds_recip(f):
    pairs = search(f, 2, 2, STATE_VARS)
    assert _has(pairs, "d*e - 1", "g*e")


def test_verify_examples():
    assert verify(DarbouxPair(P("e"), P("g*e")), F1)
    assert not verify(DarbouxPair(P("h"), P("g*e")), F1)
    assert verify(DarbouxPair(Polynomial.const(5), Polynomial()), F1)


def test_first_integral_examples():
    e, v = DarbouxPair(P("e"), P("g*e")), DarbouxPair(P("1 + 2*e*h"), P("2*g*e"))
    fis = first_integrals([e, v], F1)
    assert len(fis) == 1
    assert fis[0].numerator == P("1 + 2*e*h") and fis[0].denominator == P("e^2")
    assert list(fis[0].exponents) == [-2, 1]
    assert fis[0].identity_holds(F1)
    assert first_integrals([e]) == []
    assert first_integrals([e, DarbouxPair(P("e^2"), P("2*g*e"))]) == []


@pytest.mark.parametrize("f", [F1, FH])
def test_soundness_and_integrals(f):
    pairs = search(f, 2, 2)
    assert pairs and all(verify(pr, f) for pr in pairs)
    for fi in first_integrals(pairs, f):
        assert fi.identity_holds(f)


def test_monotone_in_search_space():
    small = {pr.p for pr in search(FH, 1, 1, coeffs=range(-1, 2))}
    big = {pr.p for pr in search(FH, 2, 2)}
    assert small <= big


@given(st.lists(st.lists(st.integers(-4, 4), min_size=4, max_size=4), min_size=1, max_size=3))
def test_nullspace_is_kernel(rows):
    basis = integer_nullspace(rows, 4)
    rank = 4 - len(basis)
    assert rank <= len(rows)
    for v in basis:
        assert any(v)
        for r in rows:
            assert sum(a * b for a, b in zip(r, v)) == 0
