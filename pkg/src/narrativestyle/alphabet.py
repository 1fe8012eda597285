"""Finite symbol systems and their encoding as compact strings.

An alphabet is an ordered set of single-character codes, each paired with a
human label (``a`` -> ``action``). Narratives become words over an alphabet,
serialized as plain strings such as ``"amv"``.
"""
from __future__ import annotations

import configparser
import string
from dataclasses import dataclass
from importlib import resources
from pathlib import Path
from typing import Iterable, Iterator, Sequence

from .errors import ValidationError

# 94 printable, non-whitespace characters in a fixed order.
CODE_POOL = string.ascii_lowercase + string.ascii_uppercase + string.digits + string.punctuation


@dataclass(frozen=True)
class Symbol:
    code: str
    label: str

    def __post_init__(self):
        if len(self.code) != 1 or not self.code.isprintable() or self.code.isspace():
            raise ValidationError(f"symbol code must be one printable non-space character, got {self.code!r}")
        if not self.label:
            raise ValidationError(f"symbol {self.code!r} has an empty label")


@dataclass(frozen=True)
class Alphabet:
    name: str
    symbols: tuple[Symbol, ...]

    def __post_init__(self):
        if not self.symbols:
            raise ValidationError(f"alphabet {self.name!r} has no symbols")
        seen_codes: set[str] = set()
        seen_labels: set[str] = set()
        for sym in self.symbols:
            if sym.code in seen_codes:
                raise ValidationError(f"alphabet {self.name!r}: duplicate code {sym.code!r}")
            if sym.label in seen_labels:
                raise ValidationError(f"alphabet {self.name!r}: duplicate label {sym.label!r}")
            seen_codes.add(sym.code)
            seen_labels.add(sym.label)
        object.__setattr__(self, "_by_code", {s.code: s.label for s in self.symbols})
        object.__setattr__(self, "_by_label", {s.label: s.code for s in self.symbols})

    def __len__(self) -> int:
        return len(self.symbols)

    def __iter__(self) -> Iterator[Symbol]:
        return iter(self.symbols)

    def __contains__(self, code: object) -> bool:
        return code in self._by_code

    @property
    def codes(self) -> str:
        return "".join(s.code for s in self.symbols)

    @property
    def labels(self) -> list[str]:
        return [s.label for s in self.symbols]

    def label_of(self, code: str) -> str:
        return self._by_code[code]

    def code_of(self, label: str) -> str:
        return self._by_label[label]

    def has_label(self, label: str) -> bool:
        return label in self._by_label

    def sequence(self, codes: str) -> "SymbolSequence":
        """Validate a code string against this alphabet."""
        for pos, ch in enumerate(codes):
            if ch not in self._by_code:
                raise ValidationError(f"unknown code {ch!r} at position {pos} for alphabet {self.name!r}")
        return SymbolSequence(self.name, codes)


@dataclass(frozen=True)
class SymbolSequence:
    """A word over an alphabet. ``codes`` is the compact string form."""

    alphabet_name: str
    codes: str

    def __len__(self) -> int:
        return len(self.codes)

    def __str__(self) -> str:
        return self.codes


def build_alphabet(name: str, entries: Iterable[tuple[str, str]]) -> Alphabet:
    entries = list(entries)
    if not entries:
        raise ValidationError(f"alphabet {name!r}: empty entry list")
    return Alphabet(name, tuple(Symbol(code, label) for code, label in entries))


def product(a: Alphabet, b: Alphabet, code_map: dict[tuple[str, str], str] | None = None) -> Alphabet:
    """Cartesian product of two alphabets.

    Pairs are enumerated in ``(a, b)`` declaration order. Labels are joined
    with ``+``. Without ``code_map`` codes come from ``CODE_POOL`` in pair
    order; ``code_map`` maps ``(code_a, code_b)`` to the new code.
    """
    pairs = [(x, y) for x in a for y in b]
    if code_map is None:
        if len(pairs) > len(CODE_POOL):
            raise ValidationError(
                f"product of {a.name!r} and {b.name!r} needs {len(pairs)} codes; "
                f"only {len(CODE_POOL)} printable codes exist, pass code_map"
            )
        codes = list(CODE_POOL[: len(pairs)])
    else:
        missing = [(x.code, y.code) for x, y in pairs if (x.code, y.code) not in code_map]
        if missing:
            raise ValidationError(f"code_map does not cover pairs {missing[:5]}")
        codes = [code_map[(x.code, y.code)] for x, y in pairs]
    entries = [(c, f"{x.label}+{y.label}") for c, (x, y) in zip(codes, pairs)]
    return build_alphabet(f"{a.name}x{b.name}", entries)


def encode(labels: Sequence[str], alphabet: Alphabet) -> SymbolSequence:
    out = []
    for idx, label in enumerate(labels):
        if not alphabet.has_label(label):
            raise ValidationError(f"unknown label {label!r} at clause {idx} for alphabet {alphabet.name!r}")
        out.append(alphabet.code_of(label))
    return SymbolSequence(alphabet.name, "".join(out))


def decode(seq: SymbolSequence | str, alphabet: Alphabet) -> list[str]:
    codes = seq.codes if isinstance(seq, SymbolSequence) else seq
    labels = []
    for pos, ch in enumerate(codes):
        if ch not in alphabet:
            raise ValidationError(f"unknown code {ch!r} at position {pos} for alphabet {alphabet.name!r}")
        labels.append(alphabet.label_of(ch))
    return labels


def load_alphabet(path: str | Path) -> Alphabet:
    """Read an INI-style declaration: ``[alphabet] name=...`` and ``[symbols] code = label``."""
    parser = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    parser.optionxform = str  # codes are case-sensitive
    try:
        with open(path, encoding="utf-8") as fh:
            parser.read_file(fh)
    except configparser.Error as exc:
        raise ValidationError(f"{path}: {exc}") from exc
    if not parser.has_section("symbols"):
        raise ValidationError(f"{path}: missing [symbols] section")
    name = parser.get("alphabet", "name", fallback=Path(path).stem)
    return build_alphabet(name, [(code, label.strip()) for code, label in parser.items("symbols")])


def default_alphabet() -> Alphabet:
    """The shipped process alphabet (a/m/v/s)."""
    with resources.as_file(resources.files("narrativestyle") / "data" / "process.ini") as path:
        return load_alphabet(path)


PROCESS_LABELS = ("action", "mental", "verbal", "state")
