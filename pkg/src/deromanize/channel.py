"""Emission model: edit-operation parameters and their machine form.

The channel rewrites one original-script character sequence into Latin
characters through substitutions (c_o -> c_l), deletions (c_o -> eps) and
insertions (eps -> c_l).  Per source character the substitution targets
and deletion form one multinomial; insertions form their own multinomial,
so the machine is deliberately deficient when insertions are enabled.

Substitution priors are read from character-pair mapping files (phonetic
keyboard layouts, visually confusable symbol lists) and enter training as
Dirichlet pseudo-counts.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Optional, Sequence

import numpy as np

from .automata import EPSILON, SymbolTable, Wfst
from .semiring import ExpectationWeight, LogWeight, arc_weight_with_basis

logger = logging.getLogger(__name__)

DELETE_TOKEN = "<del>"
INSERT_TOKEN = "<ins>"
FROZEN_DELETION = math.exp(-100)


@dataclass(frozen=True, slots=True)
class EditOp:
    kind: str  # "sub" | "del" | "ins"
    source: Optional[str]
    target: Optional[str]


@dataclass(frozen=True, slots=True)
class DelayLimit:
    """Bound on |#deletions - #insertions| along any path prefix."""

    d: int

    def __post_init__(self):
        if self.d < 1:
            raise ValueError("delay limit must be at least 1")


@dataclass
class PriorSpec:
    """Dirichlet pseudo-counts over substitution pairs.

    alpha[(c_o, c_l)] is the number of mappings across the source files
    that relate the two characters.
    """

    alpha: dict[tuple[str, str], float] = field(default_factory=dict)
    provenance: list[str] = field(default_factory=list)
    skipped: list[tuple[str, str]] = field(default_factory=list)

    def alpha_by_op_id(self, params: "EmissionParams") -> dict[int, float]:
        out = {}
        for op, op_id in params.op_ids.items():
            if op.kind == "sub":
                a = self.alpha.get((op.source, op.target))
                if a:
                    out[op_id] = a
        return out


@dataclass
class EmissionParams:
    """Edit-operation multinomials with a dense, stable op-id assignment.

    ``families[c_o]`` maps each allowed Latin target (or None for deletion)
    to its probability and sums to one; ``insertions`` is the insertion
    multinomial, meaningful only while ``insertions_enabled``.
    """

    source_alphabet: tuple[str, ...]
    latin_alphabet: tuple[str, ...]
    families: dict[str, dict[Optional[str], float]]
    insertions: dict[str, float]
    insertions_enabled: bool = True
    frozen_deletion_value: Optional[float] = None
    ops: list[EditOp] = field(default_factory=list)
    op_ids: dict[EditOp, int] = field(default_factory=dict)

    def __post_init__(self):
        if not self.ops:
            self._assign_op_ids()

    def _assign_op_ids(self) -> None:
        ops: list[EditOp] = []
        for s in sorted(self.families):
            for t in sorted(t for t in self.families[s] if t is not None):
                ops.append(EditOp("sub", s, t))
        for s in sorted(self.families):
            if None in self.families[s]:
                ops.append(EditOp("del", s, None))
        for t in sorted(self.insertions):
            ops.append(EditOp("ins", None, t))
        self.ops = ops
        self.op_ids = {op: i for i, op in enumerate(ops)}

    def op_prob(self, op: EditOp) -> float:
        if op.kind == "ins":
            return self.insertions[op.target]
        key = op.target if op.kind == "sub" else None
        return self.families[op.source][key]

    def validate(self, tol: float = 1e-9) -> None:
        for s, fam in self.families.items():
            total = sum(fam.values())
            if abs(total - 1.0) > tol:
                raise ValueError(f"family {s!r} sums to {total!r}")
        if self.insertions_enabled and self.insertions:
            total = sum(self.insertions.values())
            if abs(total - 1.0) > tol:
                raise ValueError(f"insertion family sums to {total!r}")

    def with_tables(self, families: dict[str, dict[Optional[str], float]],
                    insertions: dict[str, float]) -> "EmissionParams":
        """Same support and op ids, new probability values."""
        return replace(self, families=families, insertions=insertions,
                       ops=self.ops, op_ids=self.op_ids)


def init_params(source_alphabet: Iterable[str], latin_alphabet: Iterable[str],
                seed: int = 0, noise: float = 0.1,
                insertions_enabled: bool = True,
                frozen_deletion_value: Optional[float] = None) -> EmissionParams:
    """Uniform families perturbed by multiplicative noise, renormalized.

    noise=0 gives exactly uniform distributions; the same seed always
    yields the same parameters.
    """
    src = tuple(sorted(set(source_alphabet)))
    lat = tuple(sorted(set(latin_alphabet)))
    rng = np.random.default_rng(seed)

    def noisy(symbols: Sequence, pinned: Optional[dict] = None) -> dict:
        weights = {s: 1.0 * (1.0 + noise * rng.random()) for s in symbols}
        if pinned:
            for s, v in pinned.items():
                weights[s] = None  # placeholder, set below
            free = sum(w for w in weights.values() if w is not None)
            pinned_total = sum(pinned.values())
            out = {}
            for s, w in weights.items():
                out[s] = pinned[s] if w is None else w / free * (1.0 - pinned_total)
            return out
        total = sum(weights.values())
        return {s: w / total for s, w in weights.items()}

    families = {}
    for c in src:
        targets: list[Optional[str]] = list(lat) + [None]
        if frozen_deletion_value is not None:
            families[c] = noisy(targets, pinned={None: frozen_deletion_value})
        else:
            families[c] = noisy(targets)
    insertions = noisy(lat)
    return EmissionParams(src, lat, families, insertions,
                          insertions_enabled=insertions_enabled,
                          frozen_deletion_value=frozen_deletion_value)


def apply_restrictions(params: EmissionParams, restricted: Iterable[str],
                       specialized_pairs: Iterable[tuple[str, str]] = ()) -> EmissionParams:
    """Confine restricted characters (space, punctuation) to insertion,
    deletion and substitution with themselves.

    A restricted character may not be produced by other sources nor map to
    other targets; ``specialized_pairs`` whitelists extra cross-script
    substitutions such as the Arabic question mark for "?".  Families are
    renormalized and op ids reassigned over the shrunken support.
    """
    restricted = set(restricted)
    allowed_cross = set(specialized_pairs)
    families: dict[str, dict[Optional[str], float]] = {}
    for s, fam in params.families.items():
        kept: dict[Optional[str], float] = {}
        for t, p in fam.items():
            if t is not None:
                if s in restricted or t in restricted:
                    if not (s == t or (s, t) in allowed_cross):
                        continue
            kept[t] = p
        total = sum(kept.values())
        families[s] = {t: p / total for t, p in kept.items()}
    out = EmissionParams(params.source_alphabet, params.latin_alphabet,
                         families, dict(params.insertions),
                         insertions_enabled=params.insertions_enabled,
                         frozen_deletion_value=params.frozen_deletion_value)
    return out


def freeze_deletions(params: EmissionParams, value: float = FROZEN_DELETION) -> EmissionParams:
    """Pin every deletion probability to ``value`` and renormalize."""
    families = {}
    for s, fam in params.families.items():
        if None not in fam:
            families[s] = dict(fam)
            continue
        rest = {t: p for t, p in fam.items() if t is not None}
        total = sum(rest.values())
        fam_new: dict[Optional[str], float] = {t: p / total * (1.0 - value) for t, p in rest.items()}
        fam_new[None] = value
        families[s] = fam_new
    return replace(params, families=families, frozen_deletion_value=value,
                   ops=params.ops, op_ids=params.op_ids)


def unfreeze_deletions(params: EmissionParams) -> EmissionParams:
    return replace(params, frozen_deletion_value=None,
                   ops=params.ops, op_ids=params.op_ids)


def load_prior(paths: Sequence, source_alphabet: Iterable[str],
               latin_alphabet: Iterable[str]) -> PriorSpec:
    """Aggregate character-pair pseudo-counts from mapping files.

    Each non-comment line is "original<TAB>latin-string"; a multi-character
    Latin string contributes one pair per character.  Pairs that fall
    outside the declared alphabets are skipped and reported.
    """
    src = set(source_alphabet)
    lat = set(latin_alphabet)
    spec = PriorSpec()
    for path in paths:
        spec.provenance.append(str(path))
        with open(path, encoding="utf-8") as fh:
            for lineno, raw in enumerate(fh, 1):
                line = raw.rstrip("\n")
                if not line.strip() or line.lstrip().startswith("#"):
                    continue
                fields = line.split("\t")
                if len(fields) != 2 or not fields[0] or not fields[1]:
                    raise ValueError(f"{path}:{lineno}: expected 'original<TAB>latin-string'")
                original = fields[0].lower()
                targets = fields[1].lower()
                if len(original) != 1:
                    raise ValueError(f"{path}:{lineno}: original side must be a single character")
                for t in targets:
                    if original not in src or t not in lat:
                        spec.skipped.append((original, t))
                        continue
                    spec.alpha[(original, t)] = spec.alpha.get((original, t), 0.0) + 1.0
    if spec.skipped:
        logger.warning("prior: skipped %d out-of-alphabet pairs", len(spec.skipped))
    return spec


def build_emission_fst(params: EmissionParams, delay: DelayLimit,
                       source_table: Optional[SymbolTable] = None,
                       latin_table: Optional[SymbolTable] = None,
                       weight_cls=LogWeight) -> Wfst:
    """Delay-limited emission machine: 2d+1 states labeled -d..+d.

    Substitutions are self-loops at every state; a deletion steps the delay
    up, an insertion steps it down, and neither exists at the corresponding
    boundary state.  Weights for the same edit operation are tied across
    states.  Every state is final, so a sentence may end at any residual
    delay.  In the expectation semiring each arc carries the basis vector
    of its edit operation.
    """
    d = delay.d
    if source_table is None:
        source_table = SymbolTable(params.source_alphabet)
    if latin_table is None:
        latin_table = SymbolTable(params.latin_alphabet)
    m = Wfst(weight_cls, source_table, latin_table)
    state_of = {0: m.start}
    for k in sorted(range(-d, d + 1)):
        if k != 0:
            state_of[k] = m.add_state()

    expectation = weight_cls is ExpectationWeight

    def weight_for(op: EditOp, p: float):
        neglog = -math.log(p)
        if expectation:
            return arc_weight_with_basis(params.op_ids[op], neglog)
        return weight_cls.from_neglog(neglog)

    arcs = []
    for op in params.ops:
        if op.kind == "ins" and not params.insertions_enabled:
            continue
        p = params.op_prob(op)
        if p <= 0.0:
            continue
        w = weight_for(op, p)
        if op.kind == "sub":
            arcs.append((source_table.id(op.source), latin_table.id(op.target), w, 0))
        elif op.kind == "del":
            arcs.append((source_table.id(op.source), EPSILON, w, +1))
        else:
            arcs.append((EPSILON, latin_table.id(op.target), w, -1))

    for k in range(-d, d + 1):
        s = state_of[k]
        for ilabel, olabel, w, step in arcs:
            if step == 0:
                m.add_arc(s, ilabel, olabel, w, s)
            elif step == +1 and k < d:
                m.add_arc(s, ilabel, olabel, w, state_of[k + 1])
            elif step == -1 and k > -d:
                m.add_arc(s, ilabel, olabel, w, state_of[k - 1])
        m.set_final(s)
    return m


def params_to_text(params: EmissionParams) -> str:
    lines = [
        f"source_alphabet\t{''.join(params.source_alphabet)}",
        f"latin_alphabet\t{''.join(params.latin_alphabet)}",
        f"insertions_enabled\t{int(params.insertions_enabled)}",
        f"frozen_deletion_value\t"
        f"{'none' if params.frozen_deletion_value is None else repr(params.frozen_deletion_value)}",
    ]
    for s in sorted(params.families):
        fam = params.families[s]
        for t in sorted(t for t in fam if t is not None):
            lines.append(f"{s}\t{t}\t{fam[t]!r}")
        if None in fam:
            lines.append(f"{s}\t{DELETE_TOKEN}\t{fam[None]!r}")
    for t in sorted(params.insertions):
        lines.append(f"{INSERT_TOKEN}\t{t}\t{params.insertions[t]!r}")
    return "\n".join(lines) + "\n"


def params_from_text(text: str) -> EmissionParams:
    header: dict[str, str] = {}
    families: dict[str, dict[Optional[str], float]] = {}
    insertions: dict[str, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        fields = line.split("\t")
        if len(fields) != 2 and len(fields) != 3:
            raise ValueError(f"params line {lineno}: expected 2 or 3 columns")
        if len(fields) == 2:
            header[fields[0]] = fields[1]
            continue
        s, t, p = fields
        if s == INSERT_TOKEN:
            insertions[t] = float(p)
        elif t == DELETE_TOKEN:
            families.setdefault(s, {})[None] = float(p)
        else:
            families.setdefault(s, {})[t] = float(p)
    frozen = header.get("frozen_deletion_value", "none")
    return EmissionParams(
        tuple(header.get("source_alphabet", "")),
        tuple(header.get("latin_alphabet", "")),
        families,
        insertions,
        insertions_enabled=bool(int(header.get("insertions_enabled", "1"))),
        frozen_deletion_value=None if frozen == "none" else float(frozen),
    )
