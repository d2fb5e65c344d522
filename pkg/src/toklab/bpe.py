"""Byte-pair encoding: bottom-up vocabulary construction by frequency-ranked
pair merging, and encoding by ordered merge application.

Training is deterministic: pair-count ties are broken by the
lexicographically smallest (left, right) pair, so identical corpora, flags,
and target size always yield the identical merge list. Training at a larger
target on the same corpus extends the smaller run's merge list (nesting).
"""

from __future__ import annotations

import heapq
import logging
import weakref
from dataclasses import dataclass
from typing import Optional, Sequence

from .errors import DataError, InternalError
from .textio import Corpus, word_frequencies
from .vocab import (ALGO_BPE, Tokenization, TokenizerModel, TrainFlags,
                    Vocabulary, training_metadata)

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class MergeRule:
    """One learned merge: replace adjacent (left, right) with left+right.
    Rank is the 0-based training order."""

    left: str
    right: str
    rank: int

    @property
    def product(self) -> str:
        return self.left + self.right


def merge_rules(model: TokenizerModel) -> list[MergeRule]:
    if model.merges is None:
        raise DataError(f"{model.algorithm} model has no merge list")
    return [MergeRule(left, right, rank) for rank, (left, right) in enumerate(model.merges)]


def _rewrite(units: list[str], left: str, right: str, product: str) -> list[str]:
    """Replace left/right adjacencies with the product, left to right,
    non-overlapping."""
    out: list[str] = []
    i = 0
    n = len(units)
    while i < n:
        if i + 1 < n and units[i] == left and units[i + 1] == right:
            out.append(product)
            i += 2
        else:
            out.append(units[i])
            i += 1
    return out


class _PairStats:
    """Frequency-weighted adjacent-pair bookkeeping over word states, with
    incremental updates as merges are applied."""

    def __init__(self, words: list[list[str]], freqs: list[int]):
        self.words = words
        self.freqs = freqs
        self.counts: dict[tuple[str, str], int] = {}
        self.where: dict[tuple[str, str], set[int]] = {}
        for idx, units in enumerate(words):
            f = freqs[idx]
            for pair in zip(units, units[1:]):
                self.counts[pair] = self.counts.get(pair, 0) + f
                self.where.setdefault(pair, set()).add(idx)

    def apply(self, pair: tuple[str, str], product: str) -> set[tuple[str, str]]:
        """Merge every occurrence of `pair` in every word containing it.
        Returns the set of pairs whose counts changed."""
        left, right = pair
        changed: set[tuple[str, str]] = set()
        for idx in sorted(self.where.get(pair, ())):
            units = self.words[idx]
            f = self.freqs[idx]
            for q in zip(units, units[1:]):
                self.counts[q] -= f
                s = self.where.get(q)
                if s is not None:
                    s.discard(idx)
                changed.add(q)
            new_units = _rewrite(units, left, right, product)
            self.words[idx] = new_units
            for q in zip(new_units, new_units[1:]):
                self.counts[q] = self.counts.get(q, 0) + f
                self.where.setdefault(q, set()).add(idx)
                changed.add(q)
        for q in changed:
            if self.counts.get(q, 0) <= 0:
                if self.counts.pop(q, 0) < 0:
                    raise InternalError(f"pair count went negative for {q!r}")
                self.where.pop(q, None)
        return changed


def train_bpe(corpora: Sequence[Corpus], target_size: int,
              flags: Optional[TrainFlags] = None,
              model_id: Optional[str] = None) -> TokenizerModel:
    """Learn a BPE vocabulary of `target_size` tokens: the corpus alphabet
    plus frequency-ranked merges. Stops early with a warning if pair counts
    are exhausted. Merged tokens longer than flags.max_token_chars are
    skipped."""
    flags = flags or TrainFlags()
    freqs_by_word = word_frequencies(corpora, lowercase=flags.lowercase)
    if not freqs_by_word:
        raise DataError("empty corpus: no words to train on")
    alphabet = sorted({c for w in freqs_by_word for c in w})
    if target_size < len(alphabet):
        raise DataError(
            f"target_size {target_size} is below the corpus alphabet size {len(alphabet)}")

    words = [list(w) for w in freqs_by_word]
    freqs = list(freqs_by_word.values())
    stats = _PairStats(words, freqs)

    heap = [(-c, l, r) for (l, r), c in stats.counts.items()]
    heapq.heapify(heap)

    tokens: list[str] = list(alphabet)
    token_set = set(tokens)
    merges: list[tuple[str, str]] = []
    too_long: set[tuple[str, str]] = set()

    while len(tokens) < target_size and heap:
        neg_count, left, right = heapq.heappop(heap)
        pair = (left, right)
        current = stats.counts.get(pair, 0)
        if current == 0 or -neg_count != current or pair in too_long:
            continue
        product = left + right
        if len(product) > flags.max_token_chars:
            too_long.add(pair)
            continue
        if product in token_set:
            raise InternalError(f"merge {pair!r} would duplicate existing token {product!r}")
        merges.append(pair)
        tokens.append(product)
        token_set.add(product)
        for q in stats.apply(pair, product):
            c = stats.counts.get(q, 0)
            if c > 0 and q not in too_long:
                heapq.heappush(heap, (-c, q[0], q[1]))

    if len(tokens) < target_size:
        log.warning("BPE pair counts exhausted at %d tokens (target %d)",
                    len(tokens), target_size)

    vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker="",
                            alphabet=frozenset(alphabet))
    return TokenizerModel(
        algorithm=ALGO_BPE, vocabulary=vocabulary, merges=tuple(merges),
        metadata=training_metadata(ALGO_BPE, corpora, target_size, flags, model_id))


_rank_cache: "weakref.WeakKeyDictionary[TokenizerModel, dict]" = weakref.WeakKeyDictionary()


def _merge_ranks(model: TokenizerModel) -> dict[tuple[str, str], int]:
    table = _rank_cache.get(model)
    if table is None:
        table = {pair: rank for rank, pair in enumerate(model.merges or ())}
        _rank_cache[model] = table
    return table


def encode_bpe(model: TokenizerModel, sequence: str) -> Tokenization:
    """Start from the character sequence and repeatedly apply the
    applicable merge with the lowest rank (leftmost occurrence first)
    until none applies. Characters outside the alphabet simply never
    merge and surface as single-character tokens."""
    ranks = _merge_ranks(model)
    units = list(sequence)
    while len(units) > 1:
        best_rank = None
        best_pos = -1
        for i in range(len(units) - 1):
            r = ranks.get((units[i], units[i + 1]))
            if r is not None and (best_rank is None or r < best_rank):
                best_rank = r
                best_pos = i
        if best_rank is None:
            break
        units[best_pos:best_pos + 2] = [units[best_pos] + units[best_pos + 1]]
    return Tokenization(source=sequence, tokens=tuple(units),
                        marker=model.vocabulary.continuation_marker)
