"""Weighted finite-state machines and the algorithms the cascades need.

Machines are built once and treated as immutable afterwards; composition,
shortest distance and shortest path are pure functions, so independent
sentences can be processed concurrently without shared state.

Composition comes in two flavors picked automatically by :func:`compose`:

- a three-mode epsilon filter for ordinary machines, which prevents
  epsilon paths from being counted more than once;
- failure-label ("else") composition for the one shape this system needs:
  a deterministic acceptor with backoff arcs on the left of an arbitrary
  lattice.  Unsupported shapes are rejected at runtime.
"""

from __future__ import annotations

from collections import deque
from typing import Callable, Iterable, NamedTuple, Optional, Sequence

EPSILON = 0
EPSILON_SYMBOL = "<eps>"
PHI_SYMBOL = "<phi>"


class AutomataError(Exception):
    pass


class UnknownSymbolError(AutomataError):
    """A sequence contains a character missing from the symbol table."""

    def __init__(self, symbol: str, position: int):
        super().__init__(f"unknown symbol {symbol!r} at position {position}")
        self.symbol = symbol
        self.position = position


class SymbolTableMismatchError(AutomataError):
    pass


class CompositionShapeError(AutomataError):
    """Failure-label composition was asked for an unsupported machine shape."""


class CyclicMachineError(AutomataError):
    pass


class NoPathError(AutomataError):
    """The machine has no accepting path."""


class SymbolTable:
    """Bidirectional symbol <-> integer label map; id 0 is epsilon."""

    def __init__(self, symbols: Iterable[str] = ()):
        self._sym_to_id: dict[str, int] = {EPSILON_SYMBOL: EPSILON}
        self._id_to_sym: list[str] = [EPSILON_SYMBOL]
        for sym in symbols:
            self.add(sym)

    def add(self, sym: str) -> int:
        if sym in self._sym_to_id:
            return self._sym_to_id[sym]
        label = len(self._id_to_sym)
        self._sym_to_id[sym] = label
        self._id_to_sym.append(sym)
        return label

    def id(self, sym: str) -> int:
        return self._sym_to_id[sym]

    def sym(self, label: int) -> str:
        return self._id_to_sym[label]

    def __contains__(self, sym: str) -> bool:
        return sym in self._sym_to_id

    def __len__(self) -> int:
        return len(self._id_to_sym)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SymbolTable):
            return NotImplemented
        return self._id_to_sym == other._id_to_sym

    def __iter__(self):
        return iter(self._id_to_sym)

    def items(self) -> Iterable[tuple[str, int]]:
        return ((s, i) for i, s in enumerate(self._id_to_sym))

    def to_text(self) -> str:
        return "".join(f"{s}\t{i}\n" for i, s in enumerate(self._id_to_sym))

    @classmethod
    def from_text(cls, text: str) -> "SymbolTable":
        table = cls()
        for lineno, line in enumerate(text.splitlines(), 1):
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 2:
                raise ValueError(f"symbol table line {lineno}: expected 2 columns")
            sym, label = fields[0], int(fields[1])
            if label != EPSILON and table.add(sym) != label:
                raise ValueError(f"symbol table line {lineno}: non-contiguous id {label}")
        return table


class Arc(NamedTuple):
    ilabel: int
    olabel: int
    weight: object
    nextstate: int


class Wfst:
    """Weighted transducer: per-state arc lists, one start, weighted finals.

    ``phi_label`` designates at most one input/output label as the failure
    (backoff) label, matched with "else" semantics during composition.
    State 0 is always the start state.
    """

    def __init__(self, weight_cls, isymbols: SymbolTable, osymbols: SymbolTable,
                 phi_label: Optional[int] = None):
        self.weight_cls = weight_cls
        self.isymbols = isymbols
        self.osymbols = osymbols
        self.phi_label = phi_label
        self._arcs: list[list[Arc]] = [[]]
        self.finals: dict[int, object] = {}
        self._oindex: list[Optional[dict[int, list[Arc]]]] = [None]
        self._phi_cache: dict = {}
        self._phi_checked = False

    start = 0

    def add_state(self) -> int:
        self._arcs.append([])
        self._oindex.append(None)
        return len(self._arcs) - 1

    def add_arc(self, state: int, ilabel: int, olabel: int, weight, nextstate: int) -> None:
        self._arcs[state].append(Arc(ilabel, olabel, weight, nextstate))
        self._oindex[state] = None
        if self._phi_cache:
            self._phi_cache.clear()
        self._phi_checked = False

    def set_final(self, state: int, weight=None) -> None:
        self.finals[state] = self.weight_cls.one() if weight is None else weight

    def final(self, state: int):
        return self.finals.get(state)

    def arcs(self, state: int) -> list[Arc]:
        return self._arcs[state]

    def num_states(self) -> int:
        return len(self._arcs)

    def num_arcs(self) -> int:
        return sum(len(a) for a in self._arcs)

    def sort_arcs(self) -> None:
        """Order each state's arcs by (ilabel, olabel) for deterministic output."""
        for state, arcs in enumerate(self._arcs):
            arcs.sort(key=lambda a: (a.ilabel, a.olabel, a.nextstate))
            self._oindex[state] = None

    def olabel_index(self, state: int) -> dict[int, list[Arc]]:
        """Arcs of ``state`` grouped by output label (cached)."""
        index = self._oindex[state]
        if index is None:
            index = {}
            for arc in self._arcs[state]:
                index.setdefault(arc.olabel, []).append(arc)
            self._oindex[state] = index
        return index

    def is_acceptor(self) -> bool:
        return all(a.ilabel == a.olabel for arcs in self._arcs for a in arcs)

    def map_weights(self, fn: Callable, weight_cls=None) -> "Wfst":
        """New machine with every weight (arcs and finals) passed through fn."""
        out = Wfst(weight_cls or self.weight_cls, self.isymbols, self.osymbols, self.phi_label)
        out._arcs = [[Arc(a.ilabel, a.olabel, fn(a.weight), a.nextstate) for a in arcs]
                     for arcs in self._arcs]
        out._oindex = [None] * len(out._arcs)
        out.finals = {s: fn(w) for s, w in self.finals.items()}
        return out


def chain_acceptor(seq: Sequence[str], table: SymbolTable, weight_cls) -> Wfst:
    """Linear unweighted acceptor of ``seq``: |seq|+1 states, single final."""
    m = Wfst(weight_cls, table, table)
    one = weight_cls.one()
    state = m.start
    for pos, sym in enumerate(seq):
        if sym not in table:
            raise UnknownSymbolError(sym, pos)
        nxt = m.add_state()
        m.add_arc(state, table.id(sym), table.id(sym), one, nxt)
        state = nxt
    m.set_final(state)
    return m


def compose(a: Wfst, b: Wfst) -> Wfst:
    """Compose two machines sharing a tape; the result is trimmed.

    Failure labels are honored on ``a``'s output side only; ``b`` must not
    carry them.  Weight classes must match.
    """
    if a.osymbols is not b.isymbols and a.osymbols != b.isymbols:
        raise SymbolTableMismatchError("output/input symbol tables differ")
    if a.weight_cls is not b.weight_cls:
        raise SymbolTableMismatchError(
            f"weight classes differ: {a.weight_cls.__name__} vs {b.weight_cls.__name__}")
    if b.phi_label is not None:
        raise CompositionShapeError("failure labels are supported on the left machine only")
    if a.phi_label is not None:
        return _compose_phi(a, b)
    return _compose_eps_filter(a, b)


def _compose_eps_filter(a: Wfst, b: Wfst) -> Wfst:
    # Mode 0 allows every move; after a moves alone on an output epsilon
    # (mode 1) b may not move alone, and vice versa (mode 2); joint
    # epsilon-epsilon moves happen only in mode 0.  This admits exactly one
    # interleaving per pair of matched paths.
    out = Wfst(a.weight_cls, a.isymbols, b.osymbols)
    key0 = (a.start, b.start, 0)
    state_of = {key0: out.start}
    queue = deque([key0])

    def target(key):
        s = state_of.get(key)
        if s is None:
            s = out.add_state()
            state_of[key] = s
            queue.append(key)
        return s

    while queue:
        qa, qb, mode = key = queue.popleft()
        s = state_of[key]
        fa, fb = a.final(qa), b.final(qb)
        if fa is not None and fb is not None:
            out.set_final(s, fa.times(fb))
        by_olabel = a.olabel_index(qa)
        for arc_b in b.arcs(qb):
            if arc_b.ilabel == EPSILON:
                if mode != 1:
                    t = target((qa, arc_b.nextstate, 2))
                    out.add_arc(s, EPSILON, arc_b.olabel, arc_b.weight, t)
                if mode == 0:
                    for arc_a in by_olabel.get(EPSILON, ()):
                        t = target((arc_a.nextstate, arc_b.nextstate, 0))
                        out.add_arc(s, arc_a.ilabel, arc_b.olabel,
                                    arc_a.weight.times(arc_b.weight), t)
            else:
                for arc_a in by_olabel.get(arc_b.ilabel, ()):
                    t = target((arc_a.nextstate, arc_b.nextstate, 0))
                    out.add_arc(s, arc_a.ilabel, arc_b.olabel,
                                arc_a.weight.times(arc_b.weight), t)
        if mode != 2:
            for arc_a in by_olabel.get(EPSILON, ()):
                t = target((arc_a.nextstate, qb, 1))
                out.add_arc(s, arc_a.ilabel, EPSILON, arc_a.weight, t)
    return connect(out)


def _check_phi_shape_left(a: Wfst) -> None:
    phi = a.phi_label
    for state in range(a.num_states()):
        seen: set[int] = set()
        n_phi = 0
        for arc in a.arcs(state):
            if arc.olabel == phi:
                n_phi += 1
                if arc.ilabel != phi:
                    raise CompositionShapeError("failure arc must carry the failure label on both sides")
            elif arc.olabel == EPSILON:
                raise CompositionShapeError("left machine may not mix epsilon outputs with failure arcs")
            else:
                if arc.olabel in seen:
                    raise CompositionShapeError("left machine must be deterministic on its output labels")
                seen.add(arc.olabel)
        if n_phi > 1:
            raise CompositionShapeError("at most one failure arc per state")


def _compose_phi(a: Wfst, b: Wfst) -> Wfst:
    if not a._phi_checked:
        _check_phi_shape_left(a)
        a._phi_checked = True
    phi = a.phi_label
    if any(arc.ilabel == phi for s in range(b.num_states()) for arc in b.arcs(s)):
        raise CompositionShapeError("right machine uses the failure label as an input label")
    resolve_cache = a._phi_cache

    def resolve(qa: int, label: int):
        # Follow "else" arcs until a real match; total if the bottom state
        # has an explicit arc for the label, otherwise dead.
        key = (qa, label)
        hit = resolve_cache.get(key, False)
        if hit is not False:
            return hit
        weight = None
        state = qa
        result = None
        while True:
            index = a.olabel_index(state)
            match = index.get(label)
            if match:
                arc = match[0]
                w = arc.weight if weight is None else weight.times(arc.weight)
                result = (w, arc.nextstate)
                break
            backoff = index.get(phi)
            if not backoff:
                break
            arc = backoff[0]
            weight = arc.weight if weight is None else weight.times(arc.weight)
            state = arc.nextstate
        resolve_cache[key] = result
        return result

    out = Wfst(a.weight_cls, a.isymbols, b.osymbols)
    key0 = (a.start, b.start)
    state_of = {key0: out.start}
    queue = deque([key0])
    while queue:
        qa, qb = key = queue.popleft()
        s = state_of[key]
        fa, fb = a.final(qa), b.final(qb)
        if fa is not None and fb is not None:
            out.set_final(s, fa.times(fb))
        for arc_b in b.arcs(qb):
            if arc_b.ilabel == EPSILON:
                tkey = (qa, arc_b.nextstate)
                t = state_of.get(tkey)
                if t is None:
                    t = out.add_state()
                    state_of[tkey] = t
                    queue.append(tkey)
                out.add_arc(s, EPSILON, arc_b.olabel, arc_b.weight, t)
            else:
                match = resolve(qa, arc_b.ilabel)
                if match is None:
                    continue
                w, na = match
                tkey = (na, arc_b.nextstate)
                t = state_of.get(tkey)
                if t is None:
                    t = out.add_state()
                    state_of[tkey] = t
                    queue.append(tkey)
                out.add_arc(s, arc_b.ilabel, arc_b.olabel, w.times(arc_b.weight), t)
    return connect(out)


def chain_intersect(m: Wfst, seq: Sequence[int]) -> Wfst:
    """Restrict a deterministic failure-label acceptor to one label sequence.

    Returns the linear machine carrying m's weights along ``seq`` (the result
    of composing m with a chain acceptor of ``seq``, computed directly).
    Raises NoPathError if m does not accept the sequence.
    """
    if m.phi_label is None:
        raise CompositionShapeError("chain_intersect requires a failure-label acceptor")
    phi = m.phi_label
    out = Wfst(m.weight_cls, m.isymbols, m.osymbols)
    state = m.start
    prev = out.start
    for pos, label in enumerate(seq):
        weight = None
        while True:
            index = m.olabel_index(state)
            match = index.get(label)
            if match:
                arc = match[0]
                weight = arc.weight if weight is None else weight.times(arc.weight)
                state = arc.nextstate
                break
            backoff = index.get(phi)
            if not backoff:
                raise NoPathError(f"label {label} not accepted at position {pos}")
            arc = backoff[0]
            weight = arc.weight if weight is None else weight.times(arc.weight)
            state = arc.nextstate
        nxt = out.add_state()
        out.add_arc(prev, label, label, weight, nxt)
        prev = nxt
    final = m.final(state)
    if final is None:
        raise NoPathError("sequence ends in a non-final state")
    out.set_final(prev, final)
    return out


def connect(m: Wfst) -> Wfst:
    """Drop states that are not on some start-to-final path."""
    n = m.num_states()
    reach = [False] * n
    reach[m.start] = True
    stack = [m.start]
    while stack:
        s = stack.pop()
        for arc in m.arcs(s):
            if not reach[arc.nextstate]:
                reach[arc.nextstate] = True
                stack.append(arc.nextstate)
    rev: list[list[int]] = [[] for _ in range(n)]
    for s in range(n):
        for arc in m.arcs(s):
            rev[arc.nextstate].append(s)
    coreach = [False] * n
    stack = [s for s in m.finals if reach[s]]
    for s in stack:
        coreach[s] = True
    while stack:
        s = stack.pop()
        for p in rev[s]:
            if not coreach[p]:
                coreach[p] = True
                stack.append(p)
    keep = [s for s in range(n) if reach[s] and coreach[s]]
    out = Wfst(m.weight_cls, m.isymbols, m.osymbols, m.phi_label)
    if not keep or keep[0] != m.start:
        return out  # no accepting path: bare start state
    remap = {m.start: out.start}
    for s in keep[1:]:
        remap[s] = out.add_state()
    for s in keep:
        ns = remap[s]
        for arc in m.arcs(s):
            if arc.nextstate in remap:
                out.add_arc(ns, arc.ilabel, arc.olabel, arc.weight, remap[arc.nextstate])
        final = m.final(s)
        if final is not None:
            out.set_final(ns, final)
    return out


def topological_order(m: Wfst) -> list[int]:
    """Kahn's algorithm; rejects cyclic machines."""
    n = m.num_states()
    indeg = [0] * n
    for s in range(n):
        for arc in m.arcs(s):
            indeg[arc.nextstate] += 1
    queue = deque(s for s in range(n) if indeg[s] == 0)
    order = []
    while queue:
        s = queue.popleft()
        order.append(s)
        for arc in m.arcs(s):
            indeg[arc.nextstate] -= 1
            if indeg[arc.nextstate] == 0:
                queue.append(arc.nextstate)
    if len(order) != n:
        raise CyclicMachineError("machine has a cycle; delay limiting should forbid this")
    return order


def shortest_distance(m: Wfst):
    """Forward weights per state and the total over final states.

    The machine must be acyclic; weights are combined in its semiring, so in
    the log semiring the total is the marginal path mass, in the tropical
    semiring the best path score, and in the expectation semiring the pair
    (mass, expected counts).
    """
    order = topological_order(m)
    zero = m.weight_cls.zero()
    forward = [zero] * m.num_states()
    forward[m.start] = m.weight_cls.one()
    for s in order:
        w = forward[s]
        if w.is_zero():
            continue
        for arc in m.arcs(s):
            forward[arc.nextstate] = forward[arc.nextstate].plus(w.times(arc.weight))
    total = zero
    for s, final in m.finals.items():
        if not forward[s].is_zero():
            total = total.plus(forward[s].times(final))
    return forward, total


def shortest_path(m: Wfst) -> tuple[list[Arc], object]:
    """Minimum-weight start-to-final path of an acyclic tropical machine.

    Ties resolve to the path taking the lowest-index arc at the earliest
    divergence, stopping at a final state when stopping is also optimal, so
    decoding is reproducible across runs.
    """
    from .semiring import TropicalWeight

    if m.weight_cls is not TropicalWeight:
        raise AutomataError("shortest_path requires tropical weights")
    order = topological_order(m)
    inf = float("inf")
    beta = [inf] * m.num_states()
    for s, w in m.finals.items():
        beta[s] = w.value
    for s in reversed(order):
        for arc in m.arcs(s):
            cand = arc.weight.value + beta[arc.nextstate]
            if cand < beta[s]:
                beta[s] = cand
    if beta[m.start] == inf:
        raise NoPathError("no accepting path")
    path: list[Arc] = []
    s = m.start
    while True:
        final = m.final(s)
        if final is not None and final.value == beta[s]:
            break
        for arc in m.arcs(s):
            if arc.weight.value + beta[arc.nextstate] == beta[s]:
                path.append(arc)
                s = arc.nextstate
                break
        else:  # numerically impossible on a consistent machine
            raise NoPathError("dead end while tracing the shortest path")
    return path, TropicalWeight(beta[m.start])


def prune_arcs(m: Wfst, threshold: float) -> Wfst:
    """Remove arcs heavier than ``threshold`` (negative log space); trimmed.

    Guard: within a state, if every substitution arc for some input symbol
    would go, the lightest one is kept so no input symbol loses its whole
    conditional family.
    """
    out = Wfst(m.weight_cls, m.isymbols, m.osymbols, m.phi_label)
    for _ in range(m.num_states() - 1):
        out.add_state()
    for s in range(m.num_states()):
        kept: list[Arc] = []
        doomed_subs: dict[int, Arc] = {}
        sub_survives: set[int] = set()
        for arc in m.arcs(s):
            if arc.weight.neglog <= threshold:
                kept.append(arc)
                if arc.ilabel != EPSILON and arc.olabel != EPSILON:
                    sub_survives.add(arc.ilabel)
            elif arc.ilabel != EPSILON and arc.olabel != EPSILON:
                best = doomed_subs.get(arc.ilabel)
                if best is None or arc.weight.neglog < best.weight.neglog:
                    doomed_subs[arc.ilabel] = arc
        for ilabel, arc in doomed_subs.items():
            if ilabel not in sub_survives:
                kept.append(arc)
        for arc in kept:
            out.add_arc(s, *arc)
    for s, w in m.finals.items():
        out.set_final(s, w)
    return connect(out)


def arcs_to_string(arcs: Iterable[Arc], table: SymbolTable, side: str = "input") -> str:
    """Concatenate a path's labels on one side, dropping epsilons."""
    labels = (a.ilabel for a in arcs) if side == "input" else (a.olabel for a in arcs)
    return "".join(table.sym(x) for x in labels if x != EPSILON)


def write_text(m: Wfst) -> str:
    """Textual interchange form: arc lines (src, dst, isym, osym, weight)
    then final lines (state, weight)."""
    lines = []
    for s in range(m.num_states()):
        for arc in m.arcs(s):
            lines.append(f"{s}\t{arc.nextstate}\t{m.isymbols.sym(arc.ilabel)}"
                         f"\t{m.osymbols.sym(arc.olabel)}\t{arc.weight.neglog!r}")
    for s in sorted(m.finals):
        lines.append(f"{s}\t{m.finals[s].neglog!r}")
    return "\n".join(lines) + "\n"


def read_text(text: str, weight_cls, isymbols: SymbolTable, osymbols: SymbolTable,
              phi_label: Optional[int] = None) -> Wfst:
    m = Wfst(weight_cls, isymbols, osymbols, phi_label)
    pending: list[tuple[int, ...]] = []
    max_state = 0
    arcs = []
    finals = []
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) == 5:
            src, dst = int(fields[0]), int(fields[1])
            arcs.append((src, dst, fields[2], fields[3], float(fields[4])))
            max_state = max(max_state, src, dst)
        elif len(fields) == 2:
            s = int(fields[0])
            finals.append((s, float(fields[1])))
            max_state = max(max_state, s)
        else:
            raise ValueError(f"machine text line {lineno}: expected 2 or 5 columns")
    for _ in range(max_state):
        m.add_state()
    for src, dst, isym, osym, w in arcs:
        m.add_arc(src, isymbols.id(isym), osymbols.id(osym), weight_cls.from_neglog(w), dst)
    for s, w in finals:
        m.set_final(s, weight_cls.from_neglog(w))
    return m
