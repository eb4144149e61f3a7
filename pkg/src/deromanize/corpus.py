"""Corpus ingestion, normalization and synthetic data generation.

All text entering the system passes through :func:`preprocess`: casefold,
punctuation folding to a canonical ASCII-centric set, script-side character
stripping, squashing of character runs longer than two, and whitespace
collapse.  The function is idempotent, so alphabets extracted from
preprocessed text are stable.

The synthetic channel realizes the generative story the trainers assume
(sample a source sentence, rewrite it character by character) and is the
oracle behind the end-to-end decipherment tests.
"""

from __future__ import annotations

import logging
import re
import string
import unicodedata
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import numpy as np

logger = logging.getLogger(__name__)

ARABIC_PUNCTUATION = "؟،؛"
CANONICAL_PUNCTUATION = string.punctuation + ARABIC_PUNCTUATION

# Unicode quote/dash/ellipsis variants folded to their ASCII stand-ins.
_FOLD = {
    "‘": "'", "’": "'", "‚": "'", "‛": "'", "′": "'",
    "´": "'", "`": "`",
    "“": '"', "”": '"', "„": '"', "‟": '"',
    "«": '"', "»": '"', "″": '"',
    "‐": "-", "‑": "-", "‒": "-", "–": "-",
    "—": "-", "―": "-", "−": "-",
    "…": "...",
    " ": " ",
}
_FOLD_TABLE = str.maketrans(_FOLD)
_REPEAT = re.compile(r"(.)\1{2,}", flags=re.DOTALL)
_SPACES = re.compile(r"\s+")


@dataclass(frozen=True, slots=True)
class Sentence:
    text: str
    side: str  # "latin" | "original"
    source_id: str = ""


def preprocess(text: str, side: str) -> str:
    """Normalize one sentence; returns "" when nothing survives.

    Runs of the same character longer than two collapse to two; the Latin
    side is stripped to ASCII, the original side keeps letters, digits,
    punctuation and spaces of any script but loses emoji and other symbols.
    """
    if side not in ("latin", "original"):
        raise ValueError(f"side must be 'latin' or 'original', got {side!r}")
    text = unicodedata.normalize("NFC", text).lower()
    text = text.translate(_FOLD_TABLE)
    kept = []
    for c in text:
        if c.isspace():
            kept.append(" ")
            continue
        category = unicodedata.category(c)
        if category.startswith("C"):
            continue
        if side == "latin":
            if c.isascii():
                kept.append(c)
        elif c.isascii() or category[0] in "LNP":
            kept.append(c)
    text = _REPEAT.sub(r"\1\1", "".join(kept))
    return _SPACES.sub(" ", text).strip()


def restrict_to_alphabet(text: str, alphabet: Iterable[str]) -> str:
    allowed = set(alphabet)
    return "".join(c for c in text if c in allowed)


def load_corpus(path, side: str, alphabet: Optional[Iterable[str]] = None,
                source_id: str = "") -> list[Sentence]:
    """One sentence per line; preprocessed, optionally alphabet-filtered.

    Sentences empty after cleaning are dropped and counted in the log.
    """
    sentences = []
    dropped = 0
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            text = preprocess(line.rstrip("\n"), side)
            if alphabet is not None:
                text = _SPACES.sub(" ", restrict_to_alphabet(text, alphabet)).strip()
            if not text:
                dropped += 1
                continue
            sentences.append(Sentence(text, side, source_id or str(path)))
    if dropped:
        logger.info("%s: dropped %d empty sentences after cleaning", path, dropped)
    return sentences


def extract_alphabet(texts: Iterable[str]) -> list[str]:
    chars: set[str] = set()
    for text in texts:
        chars.update(text)
    return sorted(chars)


def load_parallel(path) -> list[tuple[str, str]]:
    """TSV "latin<TAB>original", both sides preprocessed, order preserved."""
    pairs = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            fields = line.rstrip("\n").split("\t")
            if len(fields) != 2:
                raise ValueError(f"{path}:{lineno}: expected 2 tab-separated columns, "
                                 f"got {len(fields)}")
            pairs.append((preprocess(fields[0], "latin"), preprocess(fields[1], "original")))
    return pairs


def write_parallel(path, pairs: Iterable[tuple[str, str]]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for latin, original in pairs:
            fh.write(f"{latin}\t{original}\n")


@dataclass
class SyntheticChannel:
    """Character-level noisy channel for generating test data.

    ``table[c_o]`` is a normalized distribution over Latin replacements;
    deletions remove a source character, insertions inject Latin characters
    with geometrically distributed run lengths.
    """

    table: dict[str, dict[str, float]]
    insertion_rate: float = 0.0
    deletion_rate: float = 0.0
    seed: int = 0
    insertion_dist: Optional[dict[str, float]] = None

    def __post_init__(self):
        for rate in (self.insertion_rate, self.deletion_rate):
            if not 0.0 <= rate < 1.0:
                raise ValueError(f"channel rates must lie in [0, 1), got {rate}")
        for c, row in self.table.items():
            total = sum(row.values())
            if abs(total - 1.0) > 1e-9:
                raise ValueError(f"substitution row {c!r} sums to {total}")

    def latin_chars(self) -> list[str]:
        chars: set[str] = set()
        for row in self.table.values():
            chars.update(row)
        if self.insertion_dist:
            chars.update(self.insertion_dist)
        return sorted(chars)


def generate_synthetic(sentences: Sequence[str], channel: SyntheticChannel,
                       n: int) -> tuple[list[str], list[str]]:
    """Sample n source sentences and push them through the channel.

    Deterministic for a given channel seed.  Returns (latin, originals).
    """
    rng = np.random.default_rng(channel.seed)
    rows = {c: (sorted(row), np.array([row[t] for t in sorted(row)]))
            for c, row in channel.table.items()}
    if channel.insertion_dist:
        ins_syms = sorted(channel.insertion_dist)
        ins_probs = np.array([channel.insertion_dist[s] for s in ins_syms])
        ins_probs = ins_probs / ins_probs.sum()
    else:
        ins_syms = channel.latin_chars()
        ins_probs = np.full(len(ins_syms), 1.0 / len(ins_syms))

    latin: list[str] = []
    originals: list[str] = []
    for _ in range(n):
        source = sentences[int(rng.integers(len(sentences)))]
        out = []
        for c in source + "\x00":  # sentinel position for trailing insertions
            while channel.insertion_rate and rng.random() < channel.insertion_rate:
                out.append(ins_syms[int(rng.choice(len(ins_syms), p=ins_probs))])
            if c == "\x00":
                break
            if channel.deletion_rate and rng.random() < channel.deletion_rate:
                continue
            syms, probs = rows[c]
            out.append(syms[int(rng.choice(len(syms), p=probs))])
        latin.append("".join(out))
        originals.append(source)
    return latin, originals


def channel_from_file(path) -> SyntheticChannel:
    """Channel spec: "@rate value" header lines plus prior-style pair lines.

    Pair lines use the mapping-file format; repeated pairs weight the row.
    """
    rates = {"insertion_rate": 0.0, "deletion_rate": 0.0, "seed": 0.0}
    counts: dict[str, dict[str, float]] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, 1):
            line = raw.rstrip("\n")
            if not line.strip() or line.lstrip().startswith("#"):
                continue
            if line.startswith("@"):
                fields = line[1:].split()
                if len(fields) != 2 or fields[0] not in rates:
                    raise ValueError(f"{path}:{lineno}: bad header line")
                rates[fields[0]] = float(fields[1])
                continue
            fields = line.split("\t")
            if len(fields) != 2 or len(fields[0]) != 1 or not fields[1]:
                raise ValueError(f"{path}:{lineno}: expected 'original<TAB>latin-string'")
            for t in fields[1]:
                row = counts.setdefault(fields[0], {})
                row[t] = row.get(t, 0.0) + 1.0
    table = {c: {t: v / sum(row.values()) for t, v in row.items()}
             for c, row in counts.items()}
    return SyntheticChannel(table, rates["insertion_rate"], rates["deletion_rate"],
                            int(rates["seed"]))


def sample_toy_corpus(n_sentences: int, seed: int = 0, alphabet_size: int = 14,
                      lexicon_size: int = 60, words_per_sentence: tuple[int, int] = (3, 8),
                      language_seed: int = 0) -> list[str]:
    """Structured random corpus for desk-scale experiments.

    ``language_seed`` fixes the language itself (lexicon and word
    frequencies) while ``seed`` drives sentence sampling, so corpora drawn
    with different seeds share one language.  Letters follow a skewed
    distribution, giving the frequency profile ciphers are broken with.
    """
    lang = np.random.default_rng(language_seed)
    chars = string.ascii_lowercase[:alphabet_size]
    letter_weights = 1.0 / np.arange(1, alphabet_size + 1) ** 0.7
    letter_weights /= letter_weights.sum()
    lexicon = []
    seen = set()
    while len(lexicon) < lexicon_size:
        length = int(lang.integers(2, 8))
        word = "".join(chars[int(lang.choice(alphabet_size, p=letter_weights))]
                       for _ in range(length))
        if word not in seen:
            seen.add(word)
            lexicon.append(word)
    weights = 1.0 / np.arange(1, lexicon_size + 1)
    weights /= weights.sum()
    lo, hi = words_per_sentence
    rng = np.random.default_rng(seed)
    sentences = []
    for _ in range(n_sentences):
        k = int(rng.integers(lo, hi + 1))
        words = [lexicon[int(rng.choice(lexicon_size, p=weights))] for _ in range(k)]
        sentences.append(" ".join(words))
    return sentences
