import math

import numpy as np
import pytest

from deromanize.automata import (EPSILON, CompositionShapeError, CyclicMachineError,
                                 NoPathError, SymbolTable, SymbolTableMismatchError,
                                 UnknownSymbolError, Wfst, arcs_to_string,
                                 chain_acceptor, chain_intersect, compose, connect,
                                 prune_arcs, read_text, shortest_distance,
                                 shortest_path, topological_order, write_text)
from deromanize.ngram import count_ngrams, score, to_wfsa, witten_bell
from deromanize.semiring import LogWeight, TropicalWeight

from conftest import enumerate_transduction_mass, random_machine_spec


@pytest.fixture
def ab():
    return SymbolTable("ab")


def identity_fst(table, weight_cls=LogWeight):
    m = Wfst(weight_cls, table, table)
    for sym, label in table.items():
        if label != EPSILON:
            m.add_arc(0, label, label, weight_cls.one(), 0)
    m.set_final(0)
    return m


class TestChainAcceptor:
    def test_empty_string(self, ab):
        m = chain_acceptor("", ab, LogWeight)
        assert m.num_states() == 1
        assert m.final(m.start) == LogWeight.one()

    def test_two_symbols(self, ab):
        m = chain_acceptor("ab", ab, LogWeight)
        assert m.num_states() == 3
        assert [a.ilabel for s in range(3) for a in m.arcs(s)] == [ab.id("a"), ab.id("b")]

    def test_unknown_symbol_reports_position(self, ab):
        with pytest.raises(UnknownSymbolError) as err:
            chain_acceptor("abq", ab, LogWeight)
        assert err.value.position == 2
        assert err.value.symbol == "q"

    def test_constrains_outputs(self, ab):
        m = compose(chain_acceptor("ab", ab, LogWeight), identity_fst(ab))
        paths = []
        stack = [(m.start, [])]
        while stack:
            s, acc = stack.pop()
            if m.final(s) is not None:
                paths.append("".join(acc))
            for arc in m.arcs(s):
                stack.append((arc.nextstate, acc + [m.osymbols.sym(arc.olabel)]))
        assert paths == ["ab"]


class TestCompose:
    def test_identity_preserves_weight(self, ab):
        m = compose(chain_acceptor("ab", ab, LogWeight), identity_fst(ab))
        _, total = shortest_distance(m)
        assert total.value == pytest.approx(0.0, abs=1e-12)

    def test_single_arc_product(self, ab):
        xy = SymbolTable("xy")
        t = Wfst(LogWeight, ab, xy)
        t.add_arc(0, ab.id("a"), xy.id("x"), LogWeight(-math.log(0.5)), 0)
        t.set_final(0)
        m = compose(chain_acceptor("a", ab, LogWeight), t)
        _, total = shortest_distance(m)
        assert math.exp(-total.value) == pytest.approx(0.5, rel=1e-12)

    def test_symbol_table_mismatch_rejected(self, ab):
        xy = SymbolTable("xy")
        with pytest.raises(SymbolTableMismatchError):
            compose(chain_acceptor("a", ab, LogWeight), identity_fst(xy))

    def test_epsilon_paths_not_double_counted(self, ab):
        # left machine deletes "a" (a:eps), right machine inserts "b"
        # (eps:b); the matched pair must contribute exactly one path.
        mid = SymbolTable("c")
        left = Wfst(LogWeight, ab, mid)
        s1 = left.add_state()
        left.add_arc(0, ab.id("a"), EPSILON, LogWeight(-math.log(0.5)), s1)
        left.set_final(s1)
        right = Wfst(LogWeight, mid, ab)
        r1 = right.add_state()
        right.add_arc(0, EPSILON, ab.id("b"), LogWeight(-math.log(0.25)), r1)
        right.set_final(r1)
        m = compose(left, right)
        total_paths = sum(1 for s in range(m.num_states()) for _ in [0]
                          if m.final(s) is not None)
        _, total = shortest_distance(m)
        assert math.exp(-total.value) == pytest.approx(0.125, rel=1e-12)

    def test_mass_preserved_on_random_machines(self):
        # brute-force sum over matching path pairs, including epsilon moves
        rng = np.random.default_rng(42)
        table = SymbolTable("abc")
        checked = 0
        for _ in range(60):
            a = random_machine_spec(rng, max_states=5, basis_arcs=False).to_wfst(
                LogWeight, table, table)
            b = random_machine_spec(rng, max_states=5, basis_arcs=False).to_wfst(
                LogWeight, table, table)
            m = compose(a, b)
            try:
                _, total = shortest_distance(m)
            except CyclicMachineError:
                continue  # epsilon pairings can create cycles in random machines
            got = math.exp(-total.neglog) if not total.is_zero() else 0.0
            expected = _brute_force_compose_mass(a, b)
            assert got == pytest.approx(expected, rel=1e-8, abs=1e-12)
            checked += 1
        assert checked >= 40

    def test_phi_on_right_rejected(self, ab):
        m = identity_fst(ab)
        m.phi_label = ab.id("b")
        with pytest.raises(CompositionShapeError):
            compose(identity_fst(ab), m)


def _brute_force_compose_mass(a: Wfst, b: Wfst, max_depth: int = 14) -> float:
    """Sum of products over all pairs (path in a, path in b) whose output
    and input strings match after epsilon removal."""

    def paths(m: Wfst, side: str):
        out = []
        stack = [(m.start, 0.0, ())]
        while stack:
            s, w, labs = stack.pop()
            final = m.final(s)
            if final is not None:
                out.append((labs, w + final.neglog))
            if len(labs) >= max_depth:
                continue
            for arc in m.arcs(s):
                lab = arc.olabel if side == "out" else arc.ilabel
                nl = labs + ((lab,) if lab != EPSILON else ())
                stack.append((arc.nextstate, w + arc.weight.neglog, nl))
        return out

    total = 0.0
    b_paths: dict[tuple, float] = {}
    for labs, w in paths(b, "in"):
        b_paths[labs] = b_paths.get(labs, 0.0) + math.exp(-w)
    for labs, w in paths(a, "out"):
        if labs in b_paths:
            total += math.exp(-w) * b_paths[labs]
    return total


class TestFailureComposition:
    def test_lm_scoring_through_phi_matches_direct(self):
        corpus = ["abab", "aabb", "bab", "aa b", "b a"]
        model = witten_bell(count_ngrams(corpus, 3), k=2.0)
        T = to_wfsa(model)
        rng = np.random.default_rng(3)
        syms = list(model.vocab)
        for _ in range(100):
            s = "".join(rng.choice(syms) for _ in range(int(rng.integers(0, 9))))
            lat = compose(T, chain_acceptor(s, T.osymbols, LogWeight))
            _, total = shortest_distance(lat)
            assert total.value == pytest.approx(score(model, s), rel=1e-10, abs=1e-8)

    def test_chain_intersect_equals_composition(self):
        corpus = ["abab", "aabb", "bab"]
        model = witten_bell(count_ngrams(corpus, 2), k=2.0)
        T = to_wfsa(model)
        for s in ["ab", "ba", "aaa", ""]:
            ids = [T.isymbols.id(c) for c in s]
            chain = chain_intersect(T, ids)
            _, total = shortest_distance(chain)
            assert total.value == pytest.approx(score(model, s), abs=1e-10)


class TestShortestDistance:
    def test_single_path(self, ab):
        m = Wfst(LogWeight, ab, ab)
        s1, s2 = m.add_state(), m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), LogWeight(1.0), s1)
        m.add_arc(s1, ab.id("b"), ab.id("b"), LogWeight(2.0), s2)
        m.set_final(s2)
        _, total = shortest_distance(m)
        assert total.value == pytest.approx(3.0, abs=1e-12)

    def test_parallel_arcs_sum(self, ab):
        m = Wfst(LogWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), LogWeight(-math.log(0.3)), s1)
        m.add_arc(0, ab.id("b"), ab.id("b"), LogWeight(-math.log(0.2)), s1)
        m.set_final(s1)
        _, total = shortest_distance(m)
        assert math.exp(-total.value) == pytest.approx(0.5, rel=1e-12)

    def test_random_machines_match_enumeration(self):
        rng = np.random.default_rng(5)
        table = SymbolTable("abc")
        for _ in range(40):
            m = random_machine_spec(rng, max_states=6, basis_arcs=False).to_wfst(
                LogWeight, table, table)
            _, total = shortest_distance(m)
            assert math.exp(-total.value) == pytest.approx(
                enumerate_transduction_mass(m), rel=1e-8)

    def test_cycle_rejected(self, ab):
        m = Wfst(LogWeight, ab, ab)
        m.add_arc(0, ab.id("a"), ab.id("a"), LogWeight.one(), 0)
        m.set_final(0)
        with pytest.raises(CyclicMachineError):
            shortest_distance(m)


class TestShortestPath:
    def test_picks_lighter_arc(self, ab):
        m = Wfst(TropicalWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), TropicalWeight(2.0), s1)
        m.add_arc(0, ab.id("b"), ab.id("b"), TropicalWeight(1.0), s1)
        m.set_final(s1)
        path, w = shortest_path(m)
        assert w.value == 1.0
        assert arcs_to_string(path, ab) == "b"

    def test_tie_breaks_to_first_arc(self, ab):
        m = Wfst(TropicalWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("b"), ab.id("b"), TropicalWeight(1.0), s1)
        m.add_arc(0, ab.id("a"), ab.id("a"), TropicalWeight(1.0), s1)
        m.set_final(s1)
        path, _ = shortest_path(m)
        assert arcs_to_string(path, ab) == "b"

    def test_matches_tropical_shortest_distance(self):
        rng = np.random.default_rng(11)
        table = SymbolTable("abc")
        for _ in range(30):
            m = random_machine_spec(rng, basis_arcs=False).to_wfst(
                TropicalWeight, table, table)
            _, total = shortest_distance(m)
            if total.is_zero():
                with pytest.raises(NoPathError):
                    shortest_path(m)
                continue
            _, w = shortest_path(m)
            assert w.value == pytest.approx(total.value, abs=1e-12)

    def test_no_path_raises(self, ab):
        m = Wfst(TropicalWeight, ab, ab)
        with pytest.raises(NoPathError):
            shortest_path(m)

    def test_stops_at_final_on_tie(self, ab):
        # start state is final with weight equal to continuing: prefer stop
        m = Wfst(TropicalWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), TropicalWeight(0.0), s1)
        m.set_final(0, TropicalWeight(0.0))
        m.set_final(s1, TropicalWeight(0.0))
        path, _ = shortest_path(m)
        assert path == []


class TestPruneArcs:
    def _machine(self, ab):
        m = Wfst(TropicalWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), TropicalWeight(1.0), s1)
        m.add_arc(0, ab.id("a"), ab.id("b"), TropicalWeight(6.0), s1)
        m.add_arc(0, ab.id("b"), ab.id("a"), TropicalWeight(7.0), s1)
        m.add_arc(0, ab.id("b"), ab.id("b"), TropicalWeight(8.0), s1)
        m.add_arc(0, ab.id("a"), EPSILON, TropicalWeight(9.0), s1)
        m.set_final(s1)
        return m

    def test_infinite_threshold_is_identity(self, ab):
        m = self._machine(ab)
        assert prune_arcs(m, math.inf).num_arcs() == m.num_arcs()

    def test_zero_threshold_keeps_guarded_subs(self, ab):
        m = prune_arcs(self._machine(ab), 0.0)
        # one substitution per input symbol survives: the lightest one
        kept = {(a.ilabel, a.olabel) for a in m.arcs(0)}
        assert kept == {(ab.id("a"), ab.id("a")), (ab.id("b"), ab.id("a"))}

    def test_arc_count_monotone_in_schedule(self, ab):
        m = self._machine(ab)
        counts = [prune_arcs(m, t).num_arcs() for t in (math.inf, 8.0, 6.5, 5.0)]
        assert counts == sorted(counts, reverse=True)

    def test_epsilon_arcs_prunable_without_guard(self, ab):
        m = prune_arcs(self._machine(ab), 6.5)
        assert all(a.olabel != EPSILON for a in m.arcs(0))


class TestConnect:
    def test_removes_unreachable(self, ab):
        m = Wfst(LogWeight, ab, ab)
        s1 = m.add_state()
        m.add_state()  # orphan
        m.add_arc(0, ab.id("a"), ab.id("a"), LogWeight.one(), s1)
        m.set_final(s1)
        assert connect(m).num_states() == 2

    def test_idempotent(self, ab):
        m = Wfst(LogWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("a"), LogWeight.one(), s1)
        m.set_final(s1)
        once = connect(m)
        twice = connect(once)
        assert write_text(once) == write_text(twice)

    def test_no_dead_states_after_prune(self, ab):
        rng = np.random.default_rng(17)
        table = SymbolTable("abc")
        for _ in range(25):
            m = random_machine_spec(rng, basis_arcs=False).to_wfst(
                TropicalWeight, table, table)
            t = float(rng.uniform(0.0, 6.0))
            pruned = prune_arcs(m, t)
            n = pruned.num_states()
            fwd = {pruned.start}
            stack = [pruned.start]
            while stack:
                s = stack.pop()
                for arc in pruned.arcs(s):
                    if arc.nextstate not in fwd:
                        fwd.add(arc.nextstate)
                        stack.append(arc.nextstate)
            if pruned.finals:
                assert fwd == set(range(n))


class TestTextFormat:
    def test_round_trip(self, ab):
        m = Wfst(TropicalWeight, ab, ab)
        s1 = m.add_state()
        m.add_arc(0, ab.id("a"), ab.id("b"), TropicalWeight(0.123456789), s1)
        m.set_final(s1, TropicalWeight(1.5))
        text = write_text(m)
        again = read_text(text, TropicalWeight, ab, ab)
        assert write_text(again) == text

    def test_symbol_table_round_trip(self, ab):
        text = ab.to_text()
        again = SymbolTable.from_text(text)
        assert again == ab

    def test_topological_order_covers_all_states(self, ab):
        m = chain_acceptor("ab", ab, LogWeight)
        assert topological_order(m) == [0, 1, 2]
