"""WordPiece: likelihood-gain merging for training and greedy
longest-match-first inference with continuation markers.

The merge score is count(ab) / (count(a) * count(b)), the standard
likelihood-gain surrogate: a pair wins not by raw frequency but by how much
more often it occurs than its parts predict. Ties break on the
lexicographically smallest (left, right); training is fully deterministic.
"""

from __future__ import annotations

import heapq
import logging
from typing import Optional, Sequence

from .errors import DataError, InternalError
from .textio import Corpus, word_frequencies
from .vocab import (ALGO_WPC, DEFAULT_MARKER, Tokenization, TokenizerModel,
                    TrainFlags, Vocabulary, training_metadata)

log = logging.getLogger(__name__)

MAX_ENCODE_CHARS = 256


def _surface_len(unit: str, marker: str) -> int:
    if marker and unit.startswith(marker):
        return len(unit) - len(marker)
    return len(unit)


class _WpcStats:
    """Unit and adjacent-pair counts over word states, with incremental
    updates. Unlike plain pair counting, merging (a, b) also changes the
    denominators of every pair that contains a or b."""

    def __init__(self, words: list[list[str]], freqs: list[int]):
        self.words = words
        self.freqs = freqs
        self.unit_counts: dict[str, int] = {}
        self.pair_counts: dict[tuple[str, str], int] = {}
        self.where: dict[tuple[str, str], set[int]] = {}
        self.pairs_by_unit: dict[str, set[tuple[str, str]]] = {}
        for idx, units in enumerate(words):
            f = freqs[idx]
            for u in units:
                self.unit_counts[u] = self.unit_counts.get(u, 0) + f
            for pair in zip(units, units[1:]):
                self._add_pair(pair, f, idx)

    def _add_pair(self, pair, f, idx):
        self.pair_counts[pair] = self.pair_counts.get(pair, 0) + f
        self.where.setdefault(pair, set()).add(idx)
        self.pairs_by_unit.setdefault(pair[0], set()).add(pair)
        self.pairs_by_unit.setdefault(pair[1], set()).add(pair)

    def score(self, pair: tuple[str, str]) -> float:
        c = self.pair_counts.get(pair, 0)
        if c <= 0:
            return 0.0
        return c / (self.unit_counts[pair[0]] * self.unit_counts[pair[1]])

    def apply(self, pair: tuple[str, str], product: str,
              rewrite) -> set[tuple[str, str]]:
        """Merge every occurrence of `pair`; returns all pairs whose score
        may have changed (count or denominator)."""
        left, right = pair
        touched_units: set[str] = set()
        changed: set[tuple[str, str]] = set()
        for idx in sorted(self.where.get(pair, ())):
            units = self.words[idx]
            f = self.freqs[idx]
            for q in zip(units, units[1:]):
                self.pair_counts[q] -= f
                s = self.where.get(q)
                if s is not None:
                    s.discard(idx)
                changed.add(q)
            new_units = rewrite(units, left, right, product)
            self.words[idx] = new_units
            delta: dict[str, int] = {}
            for u in units:
                delta[u] = delta.get(u, 0) - 1
            for u in new_units:
                delta[u] = delta.get(u, 0) + 1
            for u, d in delta.items():
                if d:
                    self.unit_counts[u] = self.unit_counts.get(u, 0) + d * f
                    touched_units.add(u)
            for q in zip(new_units, new_units[1:]):
                self.pair_counts[q] = self.pair_counts.get(q, 0) + f
                self.where.setdefault(q, set()).add(idx)
                self.pairs_by_unit.setdefault(q[0], set()).add(q)
                self.pairs_by_unit.setdefault(q[1], set()).add(q)
                changed.add(q)
        for q in list(changed):
            if self.pair_counts.get(q, 0) <= 0:
                if self.pair_counts.pop(q, 0) < 0:
                    raise InternalError(f"pair count went negative for {q!r}")
                self.where.pop(q, None)
                for u in q:
                    s = self.pairs_by_unit.get(u)
                    if s is not None:
                        s.discard(q)
        for u in list(touched_units):
            if self.unit_counts.get(u, 0) <= 0:
                if self.unit_counts.pop(u, 0) < 0:
                    raise InternalError(f"unit count went negative for {u!r}")
                self.pairs_by_unit.pop(u, None)
            changed.update(self.pairs_by_unit.get(u, ()))
        return changed


def _rewrite_wpc(units: list[str], left: str, right: str, product: str) -> list[str]:
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


def train_wpc(corpora: Sequence[Corpus], target_size: int,
              flags: Optional[TrainFlags] = None,
              model_id: Optional[str] = None) -> TokenizerModel:
    """Learn a WordPiece vocabulary of `target_size` tokens. The initial
    alphabet holds both bare and marker-prefixed single characters; each
    merge picks the pair maximizing count(ab)/(count(a)*count(b))."""
    flags = flags or TrainFlags()
    marker = DEFAULT_MARKER
    freqs_by_word = word_frequencies(corpora, lowercase=flags.lowercase)
    if not freqs_by_word:
        raise DataError("empty corpus: no words to train on")
    chars = sorted({c for w in freqs_by_word for c in w})
    initial = chars + [marker + c for c in chars]
    if target_size < len(initial):
        raise DataError(
            f"target_size {target_size} is below the alphabet size {len(initial)} "
            f"(bare plus marker-prefixed single characters)")

    words = [[w[0]] + [marker + c for c in w[1:]] for w in freqs_by_word]
    freqs = list(freqs_by_word.values())
    stats = _WpcStats(words, freqs)

    heap = [(-stats.score(pair), pair[0], pair[1]) for pair in stats.pair_counts]
    heapq.heapify(heap)

    tokens: list[str] = list(initial)
    token_set = set(tokens)
    merges: list[tuple[str, str]] = []
    too_long: set[tuple[str, str]] = set()

    while len(tokens) < target_size and heap:
        neg_score, left, right = heapq.heappop(heap)
        pair = (left, right)
        if pair in too_long:
            continue
        current = stats.score(pair)
        if current <= 0.0 or -neg_score != current:
            continue
        product = left + (right[len(marker):] if right.startswith(marker) else right)
        if _surface_len(product, marker) > flags.max_token_chars:
            too_long.add(pair)
            continue
        if product in token_set:
            raise InternalError(f"merge {pair!r} would duplicate existing token {product!r}")
        merges.append(pair)
        tokens.append(product)
        token_set.add(product)
        for q in stats.apply(pair, product, _rewrite_wpc):
            s = stats.score(q)
            if s > 0.0 and q not in too_long:
                heapq.heappush(heap, (-s, q[0], q[1]))

    if len(tokens) < target_size:
        log.warning("WordPiece pair counts exhausted at %d tokens (target %d)",
                    len(tokens), target_size)

    vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker=marker,
                            alphabet=frozenset(chars))
    return TokenizerModel(
        algorithm=ALGO_WPC, vocabulary=vocabulary, merges=tuple(merges),
        metadata=training_metadata(ALGO_WPC, corpora, target_size, flags, model_id))


def encode_wpc(model: TokenizerModel, sequence: str) -> Tokenization:
    """Greedy longest-match-first: at each position take the longest
    vocabulary token (marker-prefixed for non-initial positions); when
    nothing matches, emit the single character as a fallback and advance."""
    if len(sequence) > MAX_ENCODE_CHARS:
        raise DataError(
            f"sequence of {len(sequence)} chars exceeds the {MAX_ENCODE_CHARS}-char encode limit")
    vocabulary = model.vocabulary
    marker = vocabulary.continuation_marker
    max_span = vocabulary.max_token_chars
    out: list[str] = []
    pos = 0
    n = len(sequence)
    while pos < n:
        prefix = marker if (pos > 0 and marker) else ""
        match = None
        span = min(n - pos, max_span)
        while span >= 1:
            candidate = prefix + sequence[pos:pos + span]
            if candidate in vocabulary:
                match = (candidate, span)
                break
            span -= 1
        if match is None:
            out.append(sequence[pos])
            pos += 1
        else:
            out.append(match[0])
            pos += match[1]
    return Tokenization(source=sequence, tokens=tuple(out), marker=marker)
