import math

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from deromanize.automata import SymbolTable, shortest_distance
from deromanize.semiring import (INF, ExpectationWeight, LogWeight, TropicalWeight,
                                 arc_weight_with_basis, log_plus)

from conftest import random_machine_spec

import numpy as np


def exp_w(p_lin, vec):
    return ExpectationWeight.from_vector(-math.log(p_lin), vec)


class TestDefinitions:
    def test_log_plus_symmetric(self):
        assert LogWeight(0.0).plus(LogWeight(0.0)).value == pytest.approx(-math.log(2), abs=1e-12)

    def test_tropical_plus_is_min(self):
        assert TropicalWeight(1.5).plus(TropicalWeight(2.5)).value == 1.5

    def test_expectation_plus_componentwise(self):
        s = exp_w(0.5, {"a": 0.5}).plus(exp_w(0.25, {"b": 0.25}))
        assert math.exp(-s.p) == pytest.approx(0.75, rel=1e-10)
        assert s.vector()["a"] == pytest.approx(0.5, rel=1e-10)
        assert s.vector()["b"] == pytest.approx(0.25, rel=1e-10)

    def test_log_times_adds(self):
        assert LogWeight(1.0).times(LogWeight(2.0)).value == 3.0

    def test_expectation_times_bilinear(self):
        t = exp_w(0.5, {"a": 1.0}).times(exp_w(0.5, {}))
        assert math.exp(-t.p) == pytest.approx(0.25, rel=1e-12)
        assert t.vector() == pytest.approx({"a": 0.5}, rel=1e-12)

    def test_tropical_zero_annihilates(self):
        assert TropicalWeight.zero().times(TropicalWeight.one()).value == INF

    def test_basis_unit_probability(self):
        w = arc_weight_with_basis(7, 0.0)
        assert w.p == 0.0 and w.vector() == {7: 1.0}

    def test_basis_quarter(self):
        w = arc_weight_with_basis(3, -math.log(0.25))
        assert math.exp(-w.p) == pytest.approx(0.25)
        assert w.vector()[3] == pytest.approx(0.25, rel=1e-12)

    def test_basis_zero_weight_is_zero_element(self):
        assert arc_weight_with_basis(3, INF).is_zero()
        assert arc_weight_with_basis(3, INF).vector() == {}

    def test_no_explicit_zeros_stored(self):
        w = exp_w(0.5, {"a": 0.0, "b": 1.0})
        assert set(w.counts) == {"b"}
        s = w.plus(exp_w(0.5, {}))
        assert 0.0 not in s.counts.values()


finite_neglog = st.floats(min_value=-50.0, max_value=50.0,
                          allow_nan=False, allow_infinity=False)
tropical_values = st.one_of(finite_neglog, st.just(INF))


def _assert_close(a: float, b: float, tol=1e-10):
    if a == b:
        return
    assert abs(a - b) <= tol * max(1.0, abs(a), abs(b))


class TestTropicalAxioms:
    @given(tropical_values, tropical_values, tropical_values)
    def test_axioms_exact(self, a, b, c):
        x, y, z = TropicalWeight(a), TropicalWeight(b), TropicalWeight(c)
        assert x.plus(y).value == y.plus(x).value
        assert x.plus(y.plus(z)).value == x.plus(y).plus(z).value
        assert x.times(y.times(z)).value == x.times(y).times(z).value
        assert x.times(y.plus(z)).value == x.times(y).plus(x.times(z)).value
        assert x.plus(TropicalWeight.zero()).value == x.value
        assert x.times(TropicalWeight.one()).value == x.value
        assert x.times(TropicalWeight.zero()).value == INF


class TestLogAxioms:
    @given(finite_neglog, finite_neglog)
    def test_plus_commutes(self, a, b):
        _assert_close(LogWeight(a).plus(LogWeight(b)).value,
                      LogWeight(b).plus(LogWeight(a)).value)

    @given(finite_neglog, finite_neglog, finite_neglog)
    def test_plus_associates(self, a, b, c):
        x, y, z = LogWeight(a), LogWeight(b), LogWeight(c)
        _assert_close(x.plus(y.plus(z)).value, x.plus(y).plus(z).value)

    @given(finite_neglog, finite_neglog, finite_neglog)
    def test_distributivity(self, a, b, c):
        x, y, z = LogWeight(a), LogWeight(b), LogWeight(c)
        _assert_close(x.times(y.plus(z)).value, x.times(y).plus(x.times(z)).value)

    @given(finite_neglog)
    def test_identities(self, a):
        x = LogWeight(a)
        assert x.plus(LogWeight.zero()).value == a
        assert x.times(LogWeight.one()).value == a
        assert x.times(LogWeight.zero()).value == INF

    @given(finite_neglog, finite_neglog)
    def test_plus_monotone_below_min(self, a, b):
        assert LogWeight(a).plus(LogWeight(b)).value <= min(a, b) + 1e-12

    def test_no_overflow_extreme_range(self):
        for a in (-745.0, -500.0, 0.0, 700.0):
            for b in (-745.0, 0.0, 1e6, INF):
                v = log_plus(a, b)
                assert not math.isnan(v)
                assert v <= min(a, b) + 1e-9


small_vec = st.dictionaries(st.integers(min_value=0, max_value=4),
                            st.floats(min_value=1e-6, max_value=10.0), max_size=3)
exp_weights = st.builds(
    lambda p, v: ExpectationWeight(p, {k: x for k, x in v.items()}),
    finite_neglog.filter(lambda x: -30 < x < 30), small_vec)


class TestExpectationAxioms:
    def _eq(self, x: ExpectationWeight, y: ExpectationWeight, tol=1e-10):
        _assert_close(x.p, y.p, tol)
        vx, vy = x.vector(), y.vector()
        for k in set(vx) | set(vy):
            _assert_close(vx.get(k, 0.0), vy.get(k, 0.0), tol)

    @settings(max_examples=60)
    @given(exp_weights, exp_weights)
    def test_plus_commutes(self, x, y):
        self._eq(x.plus(y), y.plus(x))

    @settings(max_examples=60)
    @given(exp_weights, exp_weights, exp_weights)
    def test_plus_associates(self, x, y, z):
        self._eq(x.plus(y.plus(z)), x.plus(y).plus(z), tol=1e-9)

    @settings(max_examples=60)
    @given(exp_weights, exp_weights, exp_weights)
    def test_times_associates(self, x, y, z):
        self._eq(x.times(y.times(z)), x.times(y).times(z), tol=1e-9)

    @settings(max_examples=60)
    @given(exp_weights, exp_weights, exp_weights)
    def test_left_distributivity(self, x, y, z):
        self._eq(x.times(y.plus(z)), x.times(y).plus(x.times(z)), tol=1e-9)

    @settings(max_examples=60)
    @given(exp_weights, exp_weights, exp_weights)
    def test_right_distributivity(self, x, y, z):
        self._eq(y.plus(z).times(x), y.times(x).plus(z.times(x)), tol=1e-9)

    @given(exp_weights)
    def test_identities(self, x):
        self._eq(x.plus(ExpectationWeight.zero()), x)
        self._eq(x.times(ExpectationWeight.one()), x)
        assert x.times(ExpectationWeight.zero()).is_zero()
        assert ExpectationWeight.zero().times(x).is_zero()


class TestExpectationShortestDistance:
    def test_matches_brute_force_enumeration(self):
        rng = np.random.default_rng(7)
        table = SymbolTable("abc")
        for _ in range(30):
            spec = random_machine_spec(rng)
            m = spec.to_wfst(ExpectationWeight, table, table)
            _, total = shortest_distance(m)
            mass, vector = spec.brute_force_expectation()
            assert math.exp(-total.p) == pytest.approx(mass, rel=1e-10)
            got = total.vector()
            for k in set(vector) | set(got):
                assert got.get(k, 0.0) == pytest.approx(vector.get(k, 0.0), rel=1e-10, abs=1e-12)
