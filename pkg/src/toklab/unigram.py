"""UnigramLM: top-down vocabulary construction by likelihood-loss pruning
under a token-unigram language model, with Viterbi maximum-likelihood
segmentation for inference.

Training starts from an overly large seed lexicon (all single characters
plus the highest-count-times-length word-internal substrings), alternates
hard-EM probability re-estimation with pruning of the tokens whose removal
costs the least corpus log-likelihood (leave-one-out approximation), and
never prunes single characters. EM uses Viterbi (hard) counts, which keeps
training deterministic.
"""

from __future__ import annotations

import logging
import math
from collections import Counter
from typing import Optional, Sequence

from .errors import DataError, InternalError
from .textio import Corpus, word_frequencies
from .vocab import (ALGO_UNI, Tokenization, TokenizerModel, TrainFlags,
                    Vocabulary, training_metadata)

log = logging.getLogger(__name__)

# Stand-in log-probability for tokens with zero expected count. Finite so
# arithmetic stays well-defined, but hopeless enough that Viterbi only
# routes through such a token when no alternative path exists.
ZERO_COUNT_LOGP = -1.0e100

OOV_PENALTY_GAP = 10.0


def viterbi_segment(sequence: str, scores: dict[str, float], max_piece: int,
                    oov_logp: float, banned: Optional[str] = None):
    """Maximum-log-probability segmentation via dynamic programming over cut
    positions. Unknown single characters score `oov_logp`; unknown longer
    substrings are not considered. Ties break toward fewer tokens, then
    leftmost-longest. Returns (total_logp, tokens)."""
    n = len(sequence)
    # dp[i]: best (logp, token_count, piece_lengths) over sequence[:i]
    dp: list = [None] * (n + 1)
    dp[0] = (0.0, 0, ())
    for i in range(1, n + 1):
        best = None
        for j in range(max(0, i - max_piece), i):
            prev = dp[j]
            if prev is None:
                continue
            piece = sequence[j:i]
            if piece == banned:
                continue
            lp = scores.get(piece)
            if lp is None:
                if i - j == 1:
                    lp = oov_logp
                else:
                    continue
            total = prev[0] + lp
            if best is not None:
                if total < best[0]:
                    continue
                if total == best[0]:
                    k = prev[1] + 1
                    if k > best[1]:
                        continue
                    if k == best[1] and prev[2] + (i - j,) <= best[2]:
                        continue
            best = (total, prev[1] + 1, prev[2] + (i - j,))
        dp[i] = best
    final = dp[n]
    if final is None:
        raise InternalError(f"no segmentation found for {sequence!r}")
    tokens = []
    pos = 0
    for length in final[2]:
        tokens.append(sequence[pos:pos + length])
        pos += length
    return final[0], tuple(tokens)


def _seed_counts(word_freqs: Counter, flags: TrainFlags, target_size: int,
                 alphabet: Sequence[str]):
    """Seed lexicon counts: every single character, plus the top
    seed_factor * target_size word-internal substrings (length <=
    max_piece_chars, weighted count >= 2) ranked by count * length."""
    sub_counts: Counter[str] = Counter()
    for word, f in word_freqs.items():
        L = len(word)
        for i in range(L):
            for j in range(i + 1, min(L, i + flags.max_piece_chars) + 1):
                sub_counts[word[i:j]] += f
    singles = {c: sub_counts.get(c, 0) for c in alphabet}
    candidates = [(t, c) for t, c in sub_counts.items() if len(t) > 1 and c >= 2]
    candidates.sort(key=lambda tc: (-tc[1] * len(tc[0]), tc[0]))
    budget = flags.seed_factor * target_size
    seed = dict(singles)
    for t, c in candidates[:budget]:
        seed[t] = c
    return seed


def _normalize_counts(order: Sequence[str], counts: dict[str, float]) -> dict[str, float]:
    total = sum(counts.values())
    if total <= 0:
        raise InternalError("no token mass to normalize")
    logps = {}
    for t in order:
        c = counts.get(t, 0)
        logps[t] = math.log(c / total) if c > 0 else ZERO_COUNT_LOGP
    return logps


def _em_round(logps: dict[str, float], word_items, max_piece: int):
    """One hard-EM round: Viterbi-segment every word type, accumulate
    frequency-weighted token counts, re-estimate probabilities. Returns
    (new_logps, corpus_ll_under_entering_probs)."""
    counts: dict[str, float] = {}
    ll = 0.0
    for word, f in word_items:
        lp, toks = viterbi_segment(word, logps, max_piece, ZERO_COUNT_LOGP)
        ll += f * lp
        for t in toks:
            counts[t] = counts.get(t, 0) + f
    return _normalize_counts(list(logps), counts), ll


def _loss_pass(logps: dict[str, float], word_items, max_piece: int):
    """Leave-one-out pruning losses: for every multi-character token on a
    word's Viterbi path, the frequency-weighted log-likelihood drop when
    that token is masked. Returns (losses, corpus_ll)."""
    losses: dict[str, float] = {}
    ll = 0.0
    for word, f in word_items:
        lp, toks = viterbi_segment(word, logps, max_piece, ZERO_COUNT_LOGP)
        ll += f * lp
        for t in set(toks):
            if len(t) < 2:
                continue
            lp_without, _ = viterbi_segment(word, logps, max_piece,
                                            ZERO_COUNT_LOGP, banned=t)
            losses[t] = losses.get(t, 0.0) + f * (lp - lp_without)
    return losses, ll


def train_uni(corpora: Sequence[Corpus], target_size: int,
              flags: Optional[TrainFlags] = None,
              model_id: Optional[str] = None) -> TokenizerModel:
    """Train a UnigramLM lexicon down to `target_size` tokens.

    Each round runs `flags.em_iters` hard-EM rounds, computes per-token
    removal losses, and prunes the `flags.prune_fraction` of multi-character
    tokens with the smallest loss (never below the target). A final EM round
    re-estimates probabilities; tokens left with zero expected count are
    dropped (with a warning), except single characters, which are floored to
    a hopeless-but-finite probability so the lexicon always covers its
    alphabet.
    """
    flags = flags or TrainFlags()
    word_freqs = word_frequencies(corpora, lowercase=flags.lowercase)
    if not word_freqs:
        raise DataError("empty corpus: no words to train on")
    alphabet = sorted({c for w in word_freqs for c in w})
    if target_size < len(alphabet):
        raise DataError(
            f"target_size {target_size} is below the corpus alphabet size {len(alphabet)}")

    seed = _seed_counts(word_freqs, flags, target_size, alphabet)
    word_items = list(word_freqs.items())
    max_piece = flags.max_piece_chars
    logps = _normalize_counts(sorted(seed), {t: float(c) for t, c in seed.items()})
    trace: list[dict] = [{"phase": "seed", "size": len(logps), "ll": None}]

    while len(logps) > target_size:
        for _ in range(flags.em_iters):
            logps, ll = _em_round(logps, word_items, max_piece)
            trace.append({"phase": "em", "size": len(logps), "ll": ll})
        losses, ll = _loss_pass(logps, word_items, max_piece)
        trace.append({"phase": "loss", "size": len(logps), "ll": ll})
        prunable = [t for t in logps if len(t) > 1]
        quota = max(1, int(flags.prune_fraction * len(prunable)))
        n_prune = min(quota, len(logps) - target_size)
        victims = sorted(prunable, key=lambda t: (losses.get(t, 0.0), t))[:n_prune]
        for t in victims:
            del logps[t]
        trace.append({"phase": "prune", "size": len(logps), "ll": None})

    logps, ll = _em_round(logps, word_items, max_piece)
    trace.append({"phase": "em", "size": len(logps), "ll": ll})

    dead = [t for t in logps if len(t) > 1 and logps[t] <= ZERO_COUNT_LOGP]
    if dead:
        log.warning("dropping %d tokens with zero expected count "
                    "(lexicon %d < target %d)", len(dead), len(logps) - len(dead), target_size)
        for t in dead:
            del logps[t]
    real = [lp for lp in logps.values() if lp > ZERO_COUNT_LOGP]
    floor = min(real) - OOV_PENALTY_GAP
    floored = {t: (lp if lp > ZERO_COUNT_LOGP else floor) for t, lp in logps.items()}
    log_z = _logsumexp(list(floored.values()))
    scores = {t: lp - log_z for t, lp in floored.items()}

    if len(scores) < target_size:
        log.warning("UnigramLM lexicon has %d tokens (target %d); seed material "
                    "was exhausted", len(scores), target_size)

    singles = sorted(t for t in scores if len(t) == 1)
    multis = sorted((t for t in scores if len(t) > 1),
                    key=lambda t: (-scores[t], t))
    vocabulary = Vocabulary(tokens=tuple(singles + multis), continuation_marker="",
                            alphabet=frozenset(alphabet))
    metadata = training_metadata(ALGO_UNI, corpora, target_size, flags, model_id)
    metadata["training_trace"] = trace
    return TokenizerModel(algorithm=ALGO_UNI, vocabulary=vocabulary,
                          scores=scores, metadata=metadata)


def _logsumexp(values) -> float:
    m = max(values)
    return m + math.log(sum(math.exp(v - m) for v in values))


def lexicon_total_probability(model: TokenizerModel) -> float:
    """Sum of exp(logp) over the lexicon; 1.0 up to float error."""
    if model.scores is None:
        raise DataError("not a UnigramLM model")
    return sum(math.exp(lp) for lp in model.scores.values())


def encode_uni(model: TokenizerModel, sequence: str) -> Tokenization:
    """Viterbi maximum-likelihood segmentation. Out-of-lexicon characters
    receive a penalty log-probability (lexicon minimum minus a fixed gap)
    as single-character fallbacks."""
    scores = model.scores
    if scores is None:
        raise DataError("model has no scored lexicon")
    oov_logp = min(scores.values()) - OOV_PENALTY_GAP
    max_piece = model.vocabulary.max_token_chars
    _, tokens = viterbi_segment(sequence, scores, max_piece, oov_logp)
    return Tokenization(source=sequence, tokens=tokens,
                        marker=model.vocabulary.continuation_marker)
