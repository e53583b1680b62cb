from fractions import Fraction

import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from hykeep.poly import Polynomial

settings.register_profile(
    "hykeep", max_examples=1000, deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("hykeep")

VARS = ("g", "h", "e", "d")

coeffs = st.fractions(min_value=-5, max_value=5, max_denominator=6)


@st.composite
def monomials(draw, vars_=VARS, maxdeg=3):
    out = []
    for v in vars_:
        k = draw(st.integers(0, maxdeg))
        if k:
            out.append((v, k))
    return tuple(out)


@st.composite
def polys(draw, vars_=VARS, maxterms=5, maxdeg=3):
    n = draw(st.integers(0, maxterms))
    terms = {}
    for _ in range(n):
        terms[draw(monomials(vars_, maxdeg))] = draw(coeffs)
    return Polynomial(terms)


@st.composite
def points(draw, vars_=VARS):
    return {v: draw(st.fractions(min_value=-3, max_value=3, max_denominator=7)) for v in vars_}


@pytest.fixture(scope="session")
def model():
    from hykeep.dynamics import station_keeping_model

    return station_keeping_model()


def pytest_configure(config):
    config.addinivalue_line("markers", "property: randomized property test (hypothesis)")


def pytest_collection_modifyitems(items):
    for item in items:
        fn = getattr(item, "function", None)
        if fn is not None and getattr(fn, "is_hypothesis_test", False):
            item.add_marker(pytest.mark.property)
