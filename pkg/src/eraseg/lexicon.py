"""Per-era dictionaries and per-character candidate-word extraction.

Each era gets one dictionary holding the era's training word types plus its
high-frequency character bigrams and trigrams.  At tagging time a character
collects every dictionary word that covers it, together with a boundary
value class describing where the character sits inside the match.
"""

from __future__ import annotations

import hashlib
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, NamedTuple, Sequence

from .corpus import RawCorpus
from .errors import DataError

# Boundary value classes: position of the character inside the matched word.
V_B, V_M, V_E, V_S = 0, 1, 2, 3
VALUE_NAMES = ("V_B", "V_M", "V_E", "V_S")
N_VALUE_CLASSES = 4


class Candidate(NamedTuple):
    """A dictionary word covering one character position."""

    word_id: int
    value_class: int


class Trie:
    """Prefix tree over dictionary words; nodes are plain dicts."""

    __slots__ = ("_root", "_size")

    _LEAF = ""  # sentinel key marking end-of-word

    def __init__(self, words: Iterable[str] = ()):
        self._root: dict = {}
        self._size = 0
        for w in words:
            self.insert(w)

    def insert(self, word: str) -> None:
        node = self._root
        for ch in word:
            node = node.setdefault(ch, {})
        if self._LEAF not in node:
            node[self._LEAF] = True
            self._size += 1

    def __contains__(self, word: str) -> bool:
        node = self._root
        for ch in word:
            node = node.get(ch)
            if node is None:
                return False
        return self._LEAF in node

    def __len__(self) -> int:
        return self._size

    def matches_from(self, chars: Sequence[str], start: int, max_len: int) -> list[int]:
        """Lengths n (ascending) such that chars[start:start+n] is a word."""
        node = self._root
        lengths: list[int] = []
        for n in range(1, max_len + 1):
            pos = start + n - 1
            if pos >= len(chars):
                break
            node = node.get(chars[pos])
            if node is None:
                break
            if self._LEAF in node:
                lengths.append(n)
        return lengths


@dataclass(frozen=True)
class EraLexicon:
    """One era's dictionary: word set, trie index, dense key-embedding ids."""

    era_id: int
    words: frozenset[str]
    word_ids: dict[str, int] = field(repr=False)
    id_to_word: tuple[str, ...] = field(repr=False)
    trie: Trie = field(repr=False)

    @classmethod
    def from_words(cls, era_id: int, words: Iterable[str]) -> "EraLexicon":
        ordered = sorted(set(words))
        if any(not w for w in ordered):
            raise DataError(f"era {era_id}: empty word in lexicon")
        return cls(
            era_id=era_id,
            words=frozenset(ordered),
            word_ids={w: i for i, w in enumerate(ordered)},
            id_to_word=tuple(ordered),
            trie=Trie(ordered),
        )

    def __len__(self) -> int:
        return len(self.words)

    def serialize(self) -> bytes:
        """Canonical form: words sorted, one per line, UTF-8."""
        return "".join(w + "\n" for w in sorted(self.words)).encode("utf-8")

    def content_hash(self) -> str:
        return hashlib.sha256(self.serialize()).hexdigest()

    def save(self, path: str | Path) -> None:
        Path(path).write_bytes(self.serialize())


def load_lexicon(path: str | Path, era_id: int) -> EraLexicon:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read lexicon file {path}: {exc}") from exc
    except UnicodeDecodeError as exc:
        raise DataError(f"{path}: malformed UTF-8 ({exc})") from exc
    words = [line for line in text.splitlines() if line]
    return EraLexicon.from_words(era_id, words)


def build_lexicon(
    corpus: RawCorpus,
    era_id: int,
    ngram_min_count: int,
    max_ngram: int = 5,
) -> EraLexicon:
    """Build one era's dictionary from its training sentences.

    The word types of the era form the internal dictionary; character
    bigrams and trigrams with corpus frequency >= ngram_min_count form the
    external dictionary.  Words longer than max_ngram are dropped since the
    matcher never looks at windows that wide.
    """
    if ngram_min_count < 1:
        raise DataError(f"ngram_min_count must be >= 1, got {ngram_min_count}")
    era_sents = [s for s in corpus.sentences if s.era_id == era_id]
    if not era_sents:
        raise DataError(f"no sentences for era {era_id} in {corpus.source_name}")

    words = {w for s in era_sents for w in s.words if len(w) <= max_ngram}

    counts: Counter[str] = Counter()
    for s in era_sents:
        chars = "".join(s.words)
        for n in (2, 3):
            for i in range(len(chars) - n + 1):
                counts[chars[i : i + n]] += 1
    words.update(g for g, c in counts.items() if c >= ngram_min_count)
    return EraLexicon.from_words(era_id, words)


def extract_candidates(
    chars: Sequence[str],
    lexicon: EraLexicon,
    max_ngram: int = 5,
) -> list[list[Candidate]]:
    """Collect, for every character position, the dictionary words covering it.

    A window [s, s+n) whose substring is in the lexicon contributes one
    candidate to each position it covers: V_S for a single-character match,
    V_B at the first position, V_E at the last, V_M strictly inside.
    Candidates are ordered by match start then length and deduplicated by
    (word, value class), keeping the first occurrence.
    """
    if max_ngram < 1:
        raise DataError(f"max_ngram must be >= 1, got {max_ngram}")
    out: list[list[Candidate]] = [[] for _ in chars]
    seen: list[set[Candidate]] = [set() for _ in chars]
    for start in range(len(chars)):
        for n in lexicon.trie.matches_from(chars, start, max_ngram):
            word_id = lexicon.word_ids["".join(chars[start : start + n])]
            for i in range(start, start + n):
                if n == 1:
                    vc = V_S
                elif i == start:
                    vc = V_B
                elif i == start + n - 1:
                    vc = V_E
                else:
                    vc = V_M
                cand = Candidate(word_id, vc)
                if cand not in seen[i]:
                    seen[i].add(cand)
                    out[i].append(cand)
    return out
