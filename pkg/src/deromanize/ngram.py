"""Character n-gram transition model.

Witten-Bell smoothed backoff models over characters, relative-entropy
pruning, and export to a weighted acceptor whose backoff structure is
encoded with failure arcs.  The model probabilities are kept in linear
space; machines carry negative logs.

The direct scorer :func:`score` is the reference the WFSA export is held
to: both must assign identical probability to every string.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .automata import PHI_SYMBOL, SymbolTable, Wfst
from .semiring import LogWeight

BOS = "<s>"
EOS = "</s>"

History = tuple[str, ...]


@dataclass
class NgramCounts:
    """Raw n-gram event counts for all orders up to ``order``.

    ``counts[h][w]`` is the number of times symbol ``w`` followed history
    ``h`` in the sentinel-padded corpus; every history's count is the sum
    of its continuations by construction.
    """

    order: int
    counts: dict[History, dict[str, int]]

    def vocab(self) -> list[str]:
        """Observed characters (sentinels excluded), sorted."""
        return sorted(w for w in self.counts[()] if w != EOS)


@dataclass
class NgramModel:
    """Backoff-form smoothed model: explicit probabilities for observed
    events, one backoff weight per observed history."""

    order: int
    probs: dict[tuple[History, str], float]
    backoff: dict[History, float]
    vocab: tuple[str, ...]
    k: float
    unk_prob: float  # floor for symbols outside the declared vocabulary

    def histories(self) -> set[History]:
        return {h for h, _ in self.probs}

    def num_entries(self) -> int:
        return len(self.probs)


def count_ngrams(corpus: Sequence[str], order: int) -> NgramCounts:
    """Count all n-grams up to ``order`` with sentence-boundary padding."""
    if order < 2:
        raise ValueError(f"order must be at least 2, got {order}")
    if not corpus:
        raise ValueError("empty corpus")
    counts: dict[History, dict[str, int]] = {}
    for sent in corpus:
        syms = list(sent)
        for n in range(1, order + 1):
            padded = [BOS] * (n - 1) + syms + [EOS]
            for i in range(n - 1, len(padded)):
                h = tuple(padded[i - n + 1:i])
                nxt = counts.setdefault(h, {})
                w = padded[i]
                nxt[w] = nxt.get(w, 0) + 1
    return NgramCounts(order, counts)


def witten_bell(counts: NgramCounts, k: float = 10.0,
                alphabet: Optional[Iterable[str]] = None) -> NgramModel:
    """Interpolated Witten-Bell with diversity scaling ``k``.

    p(w|h) = (c(hw) + k*d(h)*p(w|h')) / (c(h) + k*d(h)) where d(h) counts
    distinct continuations of h and h' drops h's oldest symbol; the
    recursion bottoms out in a uniform distribution over the vocabulary
    plus the end sentinel, so no in-alphabet string gets zero mass.
    """
    if k <= 0:
        raise ValueError("smoothing parameter k must be positive")
    vocab = tuple(sorted(alphabet)) if alphabet is not None else tuple(counts.vocab())
    uniform = 1.0 / (len(vocab) + 1)
    probs: dict[tuple[History, str], float] = {}
    backoff: dict[History, float] = {}

    unigrams = counts.counts[()]
    total = sum(unigrams.values())
    d0 = len(unigrams)
    denom = total + k * d0
    for w in vocab + (EOS,):
        probs[((), w)] = (unigrams.get(w, 0) + k * d0 * uniform) / denom
    unk_prob = (k * d0 * uniform) / denom

    model = NgramModel(counts.order, probs, backoff, vocab, k, unk_prob)
    histories = sorted((h for h in counts.counts if h), key=lambda h: (len(h), h))
    for h in histories:
        nxt = counts.counts[h]
        c = sum(nxt.values())
        d = len(nxt)
        denom = c + k * d
        backoff[h] = (k * d) / denom
        lower = h[1:]
        for w in sorted(nxt):
            probs[(h, w)] = (nxt[w] + k * d * prob(model, lower, w)) / denom
    return model


def prob(model: NgramModel, h: History, w: str) -> float:
    """Backoff lookup of p(w | h); total over any symbol."""
    if model.order > 1:
        h = h[-(model.order - 1):]
    else:
        h = ()
    factor = 1.0
    while True:
        p = model.probs.get((h, w))
        if p is not None:
            return factor * p
        if not h:
            return factor * model.unk_prob
        factor *= model.backoff.get(h, 1.0)
        h = h[1:]


def score(model: NgramModel, seq: Sequence[str]) -> float:
    """Negative log probability of a whole sentence, sentinels included."""
    h: History = (BOS,) * (model.order - 1)
    total = 0.0
    for w in list(seq) + [EOS]:
        total += -math.log(prob(model, h, w))
        h = (h + (w,))[-(model.order - 1):]
    return total


def perplexity(model: NgramModel, corpus: Sequence[str]) -> float:
    events = sum(len(s) + 1 for s in corpus)
    return math.exp(sum(score(model, s) for s in corpus) / events)


def _joint_prob(model: NgramModel, h: History) -> float:
    """Marginal probability of observing history h, by the chain rule.

    BOS carries no unigram mass, so a leading BOS is scored with the end
    sentinel's marginal instead.
    """
    logp = 0.0
    seq = h
    while seq:
        logp += math.log(prob(model, seq[:-1], seq[-1]))
        seq = seq[:-1]
        if len(seq) == 1 and seq[0] == BOS:
            seq = (EOS,)
    return math.exp(logp)


def entropy_prune(model: NgramModel, theta: float) -> NgramModel:
    """Drop explicit entries whose removal perturbs the model by less than
    ``theta`` in relative perplexity, rerouting their mass through backoff.

    Entries whose n-gram is itself a retained history are never dropped
    (removing them would break backoff-path equivalence); candidates are
    processed in ascending order of damage and backoff weights are
    renormalized once at the end.
    """
    if theta < 0:
        raise ValueError("pruning threshold must be nonnegative")
    if model.order < 3:
        raise ValueError("models below order 3 are kept unpruned")

    by_history: dict[History, dict[str, float]] = {}
    for (h, w), p in model.probs.items():
        by_history.setdefault(h, {})[w] = p

    candidates = []
    if theta > 0:
        for h in sorted((h for h in by_history if h), key=lambda h: (len(h), h)):
            entries = by_history[h]
            sum_p = sum(entries.values())
            sum_pb = sum(prob(model, h[1:], w) for w in entries)
            num = max(1.0 - sum_p, 0.0)
            den = 1.0 - sum_pb
            if den <= 1e-12:
                continue
            bow = num / den
            ph = _joint_prob(model, h)
            for w in sorted(entries):
                p_old = entries[w]
                pb = prob(model, h[1:], w)
                new_bow = (num + p_old) / (den + pb)
                delta_logp = math.log(new_bow * pb) - math.log(p_old)
                bow_term = num * (math.log(new_bow) - math.log(bow)) if num > 0 else 0.0
                delta_entropy = -ph * (p_old * delta_logp + bow_term)
                perp_change = math.exp(delta_entropy) - 1.0
                if perp_change < theta:
                    candidates.append((perp_change, h, w))

    candidates.sort(key=lambda c: (c[0], c[1], c[2]))
    live: dict[History, int] = {h: len(ws) for h, ws in by_history.items()}
    removed: set[tuple[History, str]] = set()
    for _, h, w in candidates:
        if live.get(h + (w,), 0) > 0:
            continue  # this n-gram is a context other entries back off into
        removed.add((h, w))
        live[h] -= 1

    if not removed:
        return model

    new_probs = {key: p for key, p in model.probs.items() if key not in removed}
    new_model = NgramModel(model.order, new_probs, {}, model.vocab, model.k, model.unk_prob)
    retained: dict[History, list[str]] = {}
    for (h, w) in new_probs:
        if h:
            retained.setdefault(h, []).append(w)
    for h in sorted(retained, key=lambda h: (len(h), h)):
        ws = retained[h]
        sum_p = sum(new_probs[(h, w)] for w in ws)
        sum_pb = sum(prob(new_model, h[1:], w) for w in ws)
        den = 1.0 - sum_pb
        new_model.backoff[h] = max(1.0 - sum_p, 0.0) / den if den > 1e-12 else 1.0
    return new_model


def to_wfsa(model: NgramModel, table: Optional[SymbolTable] = None,
            weight_cls=LogWeight) -> Wfst:
    """Compile the model into an acceptor with failure (backoff) arcs.

    One state per retained history (closed under suffixes, plus the
    begin-sentinel backbone); explicit arcs for every stored event, a
    failure arc to the one-shorter history, explicit end-sentinel mass on
    every state's final weight.  The unigram state enumerates the whole
    vocabulary, so the machine is total over the declared alphabet and has
    no failure arc at the bottom.
    """
    if table is None:
        table = SymbolTable(model.vocab)
    for w in model.vocab:
        if w not in table:
            raise ValueError(f"symbol table is missing vocabulary item {w!r}")
    phi = table.add(PHI_SYMBOL)

    states: set[History] = set()
    for h in model.histories():
        while h and h not in states:
            states.add(h)
            h = h[1:]
    states.add(())
    for j in range(1, model.order):
        states.add((BOS,) * j)

    start_h: History = (BOS,) * (model.order - 1)
    ordered = [start_h] + sorted(states - {start_h}, key=lambda h: (len(h), h))
    m = Wfst(weight_cls, table, table, phi_label=phi)
    state_of = {ordered[0]: m.start}
    for h in ordered[1:]:
        state_of[h] = m.add_state()

    def next_state(h: History, w: str) -> int:
        t = (h + (w,))[-(model.order - 1):]
        while t not in states:
            t = t[1:]
        return state_of[t]

    for h in ordered:
        s = state_of[h]
        for w in model.vocab:
            p = model.probs.get((h, w))
            if p is not None:
                label = table.id(w)
                m.add_arc(s, label, label, weight_cls.from_neglog(-math.log(p)), next_state(h, w))
        if h:
            bow = model.backoff.get(h, 1.0)
            m.add_arc(s, phi, phi, weight_cls.from_neglog(-math.log(bow)), state_of[h[1:]])
        m.set_final(s, weight_cls.from_neglog(-math.log(prob(model, h, EOS))))
    return m


def _encode_history(h: History) -> str:
    return "\t".join(h)


def model_to_text(model: NgramModel) -> str:
    """Diffable text form; lexicographic entry order, exact float round trip."""
    lines = [
        f"order\t{model.order}",
        f"k\t{model.k!r}",
        f"unk\t{model.unk_prob!r}",
        f"vocab\t{''.join(model.vocab)}",
    ]
    for (h, w) in sorted(model.probs, key=lambda key: (len(key[0]), key[0], key[1])):
        fields = ["P", *h, w, repr(model.probs[(h, w)])]
        lines.append("\t".join(fields))
    for h in sorted(model.backoff, key=lambda h: (len(h), h)):
        lines.append("\t".join(["B", *h, repr(model.backoff[h])]))
    return "\n".join(lines) + "\n"


def model_from_text(text: str) -> NgramModel:
    order = None
    k = None
    unk = None
    vocab: tuple[str, ...] = ()
    probs: dict[tuple[History, str], float] = {}
    backoff: dict[History, float] = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        if not line:
            continue
        fields = line.split("\t")
        tag = fields[0]
        if tag == "order":
            order = int(fields[1])
        elif tag == "k":
            k = float(fields[1])
        elif tag == "unk":
            unk = float(fields[1])
        elif tag == "vocab":
            vocab = tuple(fields[1]) if len(fields) > 1 else ()
        elif tag == "P":
            probs[(tuple(fields[1:-2]), fields[-2])] = float(fields[-1])
        elif tag == "B":
            backoff[tuple(fields[1:-1])] = float(fields[-1])
        else:
            raise ValueError(f"model line {lineno}: unknown record {tag!r}")
    if order is None or k is None or unk is None:
        raise ValueError("model text is missing its header")
    return NgramModel(order, probs, backoff, vocab, k, unk)
