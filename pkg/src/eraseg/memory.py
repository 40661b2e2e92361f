"""Per-era key-value memories read by attention.

For character i and era d, the candidate words covering i supply the keys
(one embedding per dictionary word) and their boundary value classes pick
rows of a shared value table.  The character's hidden state attends over
the keys and the cell output is the probability-weighted sum of the value
embeddings.  A character with no candidates reads a zero vector, neutral
under both fusion modes.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .lexicon import N_VALUE_CLASSES, Candidate

INIT_RANGE = 0.1


@dataclass
class MemoryParams:
    key_tables: tuple[Tensor, ...]  # one (|D_d|, d_a) table per era
    value_table: Tensor  # (4, d_a), shared across eras

    @property
    def n_eras(self) -> int:
        return len(self.key_tables)

    @property
    def d_a(self) -> int:
        return self.value_table.shape[1]

    def named_tensors(self) -> list[tuple[str, Tensor]]:
        out = [(f"memory.keys.{d}", t) for d, t in enumerate(self.key_tables)]
        out.append(("memory.values", self.value_table))
        return out


def init_memory_params(
    rng: np.random.Generator, lexicon_sizes: Sequence[int], d_a: int
) -> MemoryParams:
    if not lexicon_sizes:
        raise ValueError("need at least one era lexicon")
    if any(n < 1 for n in lexicon_sizes):
        raise ValueError(f"every era needs a nonempty lexicon, got sizes {list(lexicon_sizes)}")
    u = lambda r, c: Tensor(rng.uniform(-INIT_RANGE, INIT_RANGE, size=(r, c)))
    return MemoryParams(
        key_tables=tuple(u(n, d_a) for n in lexicon_sizes),
        value_table=u(N_VALUE_CLASSES, d_a),
    )


def attend(h_i: Tensor, candidates: Sequence[Candidate], key_table: Tensor) -> Tensor:
    """Distribution over the candidate keys: softmax of h_i dot each key."""
    if not candidates:
        raise ValueError("attend needs at least one candidate; caller skips empty sets")
    keys = ad.gather_rows(key_table, [c.word_id for c in candidates])
    scores = ad.matmul(h_i, ad.transpose(keys))
    return ad.softmax_row(scores)


def aggregate(p: Tensor, candidates: Sequence[Candidate], value_table: Tensor) -> Tensor:
    """Probability-weighted sum of the candidates' value-class embeddings."""
    if not candidates:
        return Tensor(np.zeros((1, value_table.shape[1])))
    if p.shape != (1, len(candidates)):
        raise ValueError(f"weights {p.shape} do not match {len(candidates)} candidates")
    values = ad.gather_rows(value_table, [c.value_class for c in candidates])
    return ad.matmul(p, values)


def read_cell(
    h_i: Tensor, candidates: Sequence[Candidate], key_table: Tensor, value_table: Tensor
) -> Tensor:
    """One era's memory output for one character: attend then aggregate."""
    if not candidates:
        return Tensor(np.zeros((1, value_table.shape[1])))
    return aggregate(attend(h_i, candidates, key_table), candidates, value_table)
