"""Per-stimulus metrics: chunkability, token count, and the character-length
baseline.

chunkability = 1 - k/n, where k is the token count and n the character
count of the sequence (continuation markers are never counted as
characters). A full character split gives 0; unsplit sequences approach 1
as they get longer.
"""

from __future__ import annotations

from .errors import DataError
from .vocab import Tokenization

METRIC_CHUNKABILITY = "chunkability"
METRIC_NUM_TOKENS = "num_tokens"
METRIC_CHAR_LENGTH = "char_length"
METRICS = (METRIC_CHUNKABILITY, METRIC_NUM_TOKENS, METRIC_CHAR_LENGTH)


def chunkability(t: Tokenization) -> float:
    """1 - (token count / character count), in [0, 1)."""
    if t.n < 1:
        raise DataError("chunkability needs at least one character")
    return 1.0 - t.k / t.n


def num_tokens(t: Tokenization) -> int:
    """Number of tokens k (the unnormalized split-count metric)."""
    return t.k


def char_length(sequence: str) -> int:
    """Unicode scalar-value count of the stimulus (no grapheme clustering)."""
    if not sequence:
        raise DataError("char_length needs a non-empty sequence")
    return len(sequence)


def metric_value(metric: str, t: Tokenization) -> float:
    if metric == METRIC_CHUNKABILITY:
        return chunkability(t)
    if metric == METRIC_NUM_TOKENS:
        return float(num_tokens(t))
    if metric == METRIC_CHAR_LENGTH:
        return float(char_length(t.source))
    raise DataError(f"unknown metric {metric!r}, expected one of {METRICS}")
