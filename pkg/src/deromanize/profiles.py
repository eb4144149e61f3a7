"""Language profiles: alphabets, delay limits, priors and restrictions.

A profile bundles everything channel construction needs for one language
pair.  The built-in Russian and Arabic profiles ship with their prior
mapping files; custom profiles cover synthetic experiments and new
language pairs.
"""

from __future__ import annotations

from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable

from .automata import SymbolTable
from .corpus import ARABIC_PUNCTUATION, CANONICAL_PUNCTUATION

_CYRILLIC = "абвгдеёжзийклмнопрстуфхцчшщъыьэюя"
_ARABIC = "ءآأؤإئابةتثجحخدذرزسشصضطظعغفقكلمنهوىي"
_LATIN = "abcdefghijklmnopqrstuvwxyz0123456789"
_ASCII_PUNCT = CANONICAL_PUNCTUATION[: -len(ARABIC_PUNCTUATION)]


@dataclass(frozen=True)
class LanguageProfile:
    name: str
    source_alphabet: str
    latin_alphabet: str
    delay: int
    prior_files: tuple[str, ...] = ()
    specialized_pairs: tuple[tuple[str, str], ...] = ()

    def restricted_chars(self) -> str:
        """Space and punctuation of either alphabet (identity-only symbols)."""
        pool = set(self.source_alphabet) | set(self.latin_alphabet)
        return "".join(sorted(c for c in pool if c == " " or c in CANONICAL_PUNCTUATION))

    def source_table(self) -> SymbolTable:
        return SymbolTable(sorted(self.source_alphabet))

    def latin_table(self) -> SymbolTable:
        return SymbolTable(sorted(self.latin_alphabet))

    def prior_paths(self) -> list[Path]:
        root = resources.files("deromanize").joinpath("data/priors")
        return [Path(str(root.joinpath(name))) for name in self.prior_files]


RUSSIAN = LanguageProfile(
    name="russian",
    source_alphabet=_CYRILLIC + " " + _ASCII_PUNCT,
    latin_alphabet=_LATIN + " " + _ASCII_PUNCT,
    delay=2,
    prior_files=(
        "ru_phonetic_student.tsv",
        "ru_phonetic_translit.tsv",
        "ru_phonetic_yawerty.tsv",
        "ru_phonetic_chat.tsv",
        "ru_visual_confusables.tsv",
    ),
)

ARABIC = LanguageProfile(
    name="arabic",
    source_alphabet=_ARABIC + " " + _ASCII_PUNCT + ARABIC_PUNCTUATION,
    latin_alphabet=_LATIN + " " + _ASCII_PUNCT,
    delay=5,
    prior_files=(
        "ar_phonetic_keyboard.tsv",
        "ar_phonetic_chat.tsv",
    ),
    specialized_pairs=(("؟", "?"), ("،", ","), ("؛", ";")),
)

PROFILES = {"russian": RUSSIAN, "arabic": ARABIC}


def custom_profile(source_alphabet: Iterable[str], latin_alphabet: Iterable[str],
                   delay: int, name: str = "custom",
                   prior_files: tuple[str, ...] = ()) -> LanguageProfile:
    return LanguageProfile(
        name=name,
        source_alphabet="".join(sorted(set(source_alphabet))),
        latin_alphabet="".join(sorted(set(latin_alphabet))),
        delay=delay,
        prior_files=prior_files,
    )
