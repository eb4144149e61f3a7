"""Shared fixtures and brute-force oracles.

The oracles here are deliberately independent of the library's lattice
algorithms: plain recursive path enumeration and textbook dynamic
programs, used to pin down the finite-state results.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import pytest

from deromanize.automata import EPSILON, SymbolTable, Wfst
from deromanize.semiring import ExpectationWeight, arc_weight_with_basis


@dataclass
class ArcSpec:
    src: int
    dst: int
    ilabel: int
    olabel: int
    op_id: int  # -1: no basis vector
    neglog: float


@dataclass
class MachineSpec:
    """Plain-data description of an acyclic machine, independent of Wfst."""

    n_states: int
    arcs: list[ArcSpec]
    finals: dict[int, float]  # state -> neglog weight

    def paths(self):
        """Yield (arc list, final neglog) for every accepting path."""
        by_src: dict[int, list[ArcSpec]] = {}
        for arc in self.arcs:
            by_src.setdefault(arc.src, []).append(arc)
        stack = [(0, [])]
        while stack:
            state, path = stack.pop()
            if state in self.finals:
                yield path, self.finals[state]
            for arc in by_src.get(state, ()):
                stack.append((arc.dst, path + [arc]))

    def brute_force_expectation(self):
        """Total mass and raw expected-count vector by path enumeration."""
        total = 0.0
        vector: dict[int, float] = {}
        for path, final_neglog in self.paths():
            mass = math.exp(-(sum(a.neglog for a in path) + final_neglog))
            total += mass
            for arc in path:
                if arc.op_id >= 0:
                    vector[arc.op_id] = vector.get(arc.op_id, 0.0) + mass
        return total, vector

    def to_wfst(self, weight_cls, isymbols: SymbolTable, osymbols: SymbolTable) -> Wfst:
        m = Wfst(weight_cls, isymbols, osymbols)
        for _ in range(self.n_states - 1):
            m.add_state()
        for arc in self.arcs:
            if weight_cls is ExpectationWeight and arc.op_id >= 0:
                w = arc_weight_with_basis(arc.op_id, arc.neglog)
            else:
                w = weight_cls.from_neglog(arc.neglog)
            m.add_arc(arc.src, arc.ilabel, arc.olabel, w, arc.dst)
        for state, neglog in self.finals.items():
            m.set_final(state, weight_cls.from_neglog(neglog))
        return m


def random_machine_spec(rng: np.random.Generator, max_states: int = 7,
                        max_labels: int = 3, max_ops: int = 6,
                        basis_arcs: bool = True) -> MachineSpec:
    """Random acyclic machine: arcs only go from lower to higher state ids."""
    n = int(rng.integers(2, max_states + 1))
    arcs = []
    for src in range(n - 1):
        for _ in range(int(rng.integers(1, 4))):
            dst = int(rng.integers(src + 1, n))
            ilabel = int(rng.integers(0, max_labels + 1))
            olabel = int(rng.integers(0, max_labels + 1))
            op_id = int(rng.integers(0, max_ops)) if basis_arcs and rng.random() < 0.7 else -1
            neglog = float(rng.uniform(0.0, 5.0))
            arcs.append(ArcSpec(src, dst, ilabel, olabel, op_id, neglog))
    finals = {n - 1: float(rng.uniform(0.0, 2.0))}
    if n > 2 and rng.random() < 0.5:
        finals[int(rng.integers(1, n - 1))] = float(rng.uniform(0.0, 2.0))
    return MachineSpec(n, arcs, finals)


def enumerate_transduction_mass(m: Wfst, max_len: int = 12) -> float:
    """Total accepting mass of an acyclic machine by path enumeration."""
    total = 0.0
    stack = [(m.start, 0.0, 0)]
    while stack:
        state, neglog, depth = stack.pop()
        final = m.final(state)
        if final is not None:
            total += math.exp(-(neglog + final.neglog))
        if depth >= max_len * 4:
            raise RuntimeError("path enumeration ran away; machine too big")
        for arc in m.arcs(state):
            stack.append((arc.nextstate, neglog + arc.weight.neglog, depth + 1))
    return total


def edit_scripts(source_alphabet: str, latin: str, delay: int):
    """All (source string, edit op list) pairs producing ``latin`` with
    every prefix delay (deletions minus insertions) within the limit."""
    results = []

    def rec(j: int, d: int, source: str, ops: list):
        if j == len(latin):
            results.append((source, list(ops)))
        else:
            for c in source_alphabet:
                ops.append(("sub", c, latin[j]))
                rec(j + 1, d, source + c, ops)
                ops.pop()
            if d - 1 >= -delay:
                ops.append(("ins", None, latin[j]))
                rec(j + 1, d - 1, source, ops)
                ops.pop()
        if d + 1 <= delay:
            for c in source_alphabet:
                ops.append(("del", c, None))
                rec(j, d + 1, source + c, ops)
                ops.pop()

    rec(0, 0, "", [])
    return results


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
