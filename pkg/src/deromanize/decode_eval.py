"""Decoding romanized text and scoring hypotheses.

Decoding builds the same cascade as training but in the tropical semiring
and reads the original-script sequence off the single best path.  Scoring
is character error rate (edit distance over reference length) plus an
edit-alignment confusion matrix with a fixed tie-break so the counts are
reproducible.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .automata import (EPSILON, NoPathError, SymbolTable, Wfst, arcs_to_string,
                       chain_acceptor, compose, shortest_path)
from .semiring import TropicalWeight

logger = logging.getLogger(__name__)

EPS_TOKEN = "<eps>"


@dataclass(frozen=True)
class Decoded:
    """Best-path decode: source string, its edit script and the path cost.

    Applying the edit script reproduces the input exactly: the target side
    of ``path`` concatenates to the romanized sentence.
    """

    source: str
    path: tuple[tuple[Optional[str], Optional[str]], ...]
    score: float


def decode(T: Wfst, S: Wfst, latin: Sequence[str], latin_table: SymbolTable) -> Decoded:
    """Most probable original-script sequence for one romanized sentence."""
    acceptor = chain_acceptor(latin, latin_table, TropicalWeight)
    lattice = compose(T, compose(S, acceptor))
    arcs, weight = shortest_path(lattice)
    source = arcs_to_string(arcs, lattice.isymbols)
    path = tuple(
        (lattice.isymbols.sym(a.ilabel) if a.ilabel != EPSILON else None,
         lattice.osymbols.sym(a.olabel) if a.olabel != EPSILON else None)
        for a in arcs)
    return Decoded(source, path, weight.value)


def decode_corpus(T: Wfst, S: Wfst, sentences: Sequence[str],
                  latin_table: SymbolTable) -> list[str]:
    """Decode each sentence; failures decode to "" and are logged."""
    out = []
    for i, sentence in enumerate(sentences):
        try:
            out.append(decode(T, S, sentence, latin_table).source)
        except NoPathError:
            logger.warning("sentence %d: no path, scored as fully wrong", i)
            out.append("")
    return out


def levenshtein(a: Sequence[str], b: Sequence[str]) -> int:
    """Unit-cost edit distance, two-row dynamic program."""
    if len(a) < len(b):
        a, b = b, a
    prev = list(range(len(b) + 1))
    for i, ca in enumerate(a, 1):
        cur = [i]
        for j, cb in enumerate(b, 1):
            cur.append(min(prev[j] + 1, cur[j - 1] + 1, prev[j - 1] + (ca != cb)))
        prev = cur
    return prev[-1]


def cer(hyp: str, ref: str) -> float:
    """Character error rate against a single reference."""
    if not ref:
        raise ValueError("empty reference")
    return levenshtein(hyp, ref) / len(ref)


@dataclass
class EvalSummary:
    total_distance: int = 0
    total_ref_len: int = 0
    sentences: int = 0
    excluded: int = 0

    @property
    def cer(self) -> float:
        return self.total_distance / self.total_ref_len if self.total_ref_len else 0.0


def corpus_cer(hyps: Sequence[str], refs: Sequence[str]) -> EvalSummary:
    """Corpus-level error: summed distances over summed reference lengths.

    Empty references are excluded from the aggregate and counted.
    """
    summary = EvalSummary()
    for hyp, ref in zip(hyps, refs):
        if not ref:
            summary.excluded += 1
            continue
        summary.total_distance += levenshtein(hyp, ref)
        summary.total_ref_len += len(ref)
        summary.sentences += 1
    if summary.excluded:
        logger.warning("evaluation: excluded %d empty references", summary.excluded)
    return summary


@dataclass
class ConfusionMatrix:
    """Alignment substitution counts; rows are predictions, columns gold.

    Epsilon rows/columns hold the characters involved in insertions and
    deletions of the minimal alignments.
    """

    counts: dict[tuple[str, str], int] = field(default_factory=dict)

    def add(self, pred: str, gold: str) -> None:
        self.counts[(pred, gold)] = self.counts.get((pred, gold), 0) + 1

    def total(self) -> int:
        return sum(self.counts.values())

    def to_tsv(self) -> str:
        preds = sorted({p for p, _ in self.counts})
        golds = sorted({g for _, g in self.counts})
        lines = ["\t".join([""] + golds)]
        for p in preds:
            row = [p] + [str(self.counts.get((p, g), 0)) for g in golds]
            lines.append("\t".join(row))
        return "\n".join(lines) + "\n"


def align(hyp: str, ref: str) -> list[tuple[str, str]]:
    """One minimal edit alignment as (predicted, gold) pairs.

    Ties prefer substitution over deletion (hyp char alone) over insertion
    (gold char alone), making the alignment deterministic.
    """
    n, m = len(hyp), len(ref)
    dist = [[0] * (m + 1) for _ in range(n + 1)]
    for i in range(1, n + 1):
        dist[i][0] = i
    for j in range(1, m + 1):
        dist[0][j] = j
    for i in range(1, n + 1):
        for j in range(1, m + 1):
            dist[i][j] = min(dist[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]),
                             dist[i - 1][j] + 1,
                             dist[i][j - 1] + 1)
    pairs = []
    i, j = n, m
    while i > 0 or j > 0:
        if i > 0 and j > 0 and dist[i][j] == dist[i - 1][j - 1] + (hyp[i - 1] != ref[j - 1]):
            pairs.append((hyp[i - 1], ref[j - 1]))
            i, j = i - 1, j - 1
        elif i > 0 and dist[i][j] == dist[i - 1][j] + 1:
            pairs.append((hyp[i - 1], EPS_TOKEN))
            i -= 1
        else:
            pairs.append((EPS_TOKEN, ref[j - 1]))
            j -= 1
    pairs.reverse()
    return pairs


def confusion(hyps: Sequence[str], refs: Sequence[str]) -> ConfusionMatrix:
    """Accumulate alignment counts over aligned sentence lists."""
    matrix = ConfusionMatrix()
    for hyp, ref in zip(hyps, refs):
        for pred, gold in align(hyp, ref):
            matrix.add(pred, gold)
    return matrix


def report_lines(hyps: Sequence[str], refs: Sequence[str]) -> Iterable[str]:
    """Per-sentence TSV rows (id, hyp, ref, distance, cer) plus a summary."""
    summary = EvalSummary()
    for i, (hyp, ref) in enumerate(zip(hyps, refs)):
        if not ref:
            summary.excluded += 1
            yield f"{i}\t{hyp}\t{ref}\t0\texcluded"
            continue
        d = levenshtein(hyp, ref)
        summary.total_distance += d
        summary.total_ref_len += len(ref)
        summary.sentences += 1
        yield f"{i}\t{hyp}\t{ref}\t{d}\t{d / len(ref):.6f}"
    yield (f"#summary\tsentences={summary.sentences}\texcluded={summary.excluded}"
           f"\tdistance={summary.total_distance}\tref_chars={summary.total_ref_len}"
           f"\tcer={summary.cer:.6f}")
