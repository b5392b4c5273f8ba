from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from chaosbound.monomial import Monomial, maximal, render_max

M = Monomial.from_mapping

exps = st.fractions(min_value=0, max_value=4, max_denominator=2)
monos = st.builds(lambda a, b: M({"d": a, "n": b}), exps, exps)


def test_render_forms():
    assert M({"d": 2}).render() == "d²"
    assert M({"d": 1, "n": Fraction(1, 2)}).render(["d", "n"]) == "d√n"
    assert M({"m": Fraction(1, 2), "d": Fraction(1, 2)}).render(["m", "d"]) == "√(md)"
    assert M({"d": Fraction(3, 2)}).render() == "d^{3/2}"
    assert Monomial.one().render() == "1"


def test_render_max_and_empty():
    assert render_max([M({"d": 1}), M({"n": Fraction(1, 2)})], ["d", "n"]) == "d ∨ √n"
    assert render_max([]) == "0"


def test_evaluate_unbound_symbol():
    with pytest.raises(KeyError, match="'n'"):
        M({"n": 1}).evaluate({"d": 3})


def test_maximal_drops_dominated():
    top = maximal([M({"d": 2}), M({"d": 1}), M({"n": 1}), M({"d": 2})])
    assert top == [M({"d": 2}), M({"n": 1})]


@given(monos, monos)
def test_product_adds_exponents(a, b):
    prod = a * b
    for s in ("d", "n"):
        assert prod.exponent(s) == a.exponent(s) + b.exponent(s)


@given(monos)
def test_sqrt_squares_back(a):
    assert a.sqrt() ** 2 == a


@given(monos, monos, st.integers(1, 50), st.integers(1, 50))
def test_dominance_is_pointwise(a, b, d, n):
    if a.dominates(b):
        assert a.evaluate({"d": d, "n": n}) >= b.evaluate({"d": d, "n": n}) * (1 - 1e-12)


@given(st.lists(monos, min_size=1, max_size=6), st.integers(1, 40), st.integers(1, 40))
def test_maximal_attains_pointwise_max(ms, d, n):
    vals = {"d": d, "n": n}
    best = max(m.evaluate(vals) for m in ms)
    assert max(m.evaluate(vals) for m in maximal(ms)) == pytest.approx(best)
