"""Ingestion of training corpora, lexical-decision data, frequency lists,
and morpheme annotations.

All loaders are pure functions of file content: NFC normalization is applied
unconditionally, rows violating invariants are dropped and counted (never
repaired), and errors carry line numbers where possible.
"""

from __future__ import annotations

import csv
import logging
import math
import unicodedata
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Optional, Sequence

from .errors import DataError

log = logging.getLogger(__name__)


def normalize_text(text: str, lowercase: bool = False) -> str:
    """NFC-normalize, optionally lowercase."""
    text = unicodedata.normalize("NFC", text)
    return text.lower() if lowercase else text


@dataclass(frozen=True)
class Corpus:
    """Training text: one sentence per line, already NFC-normalized."""

    sentences: tuple[str, ...]
    source_id: str
    language: str = "und"

    def __len__(self) -> int:
        return len(self.sentences)

    def __iter__(self):
        return iter(self.sentences)


@dataclass(frozen=True)
class Stimulus:
    """One lexical-decision item: the letter string shown to participants,
    whether it is a real word, and the per-stimulus mean response time and
    accuracy."""

    sequence: str
    is_word: bool
    rt_ms: float
    accuracy: float

    def __post_init__(self):
        if not self.sequence or any(c.isspace() for c in self.sequence):
            raise DataError(f"stimulus sequence must be non-empty and whitespace-free: {self.sequence!r}")
        if not (self.rt_ms > 0 and math.isfinite(self.rt_ms)):
            raise DataError(f"rt_ms must be a positive finite number, got {self.rt_ms!r}")
        if not (0.0 <= self.accuracy <= 1.0):
            raise DataError(f"accuracy must lie in [0, 1], got {self.accuracy!r}")


@dataclass(frozen=True)
class ColumnSchema:
    """Maps the caller's column names onto the fields of Stimulus."""

    sequence: str = "sequence"
    is_word: str = "is_word"
    rt: str = "rt"
    accuracy: str = "accuracy"


@dataclass(frozen=True)
class LexicalDecisionSet:
    """Loaded stimuli plus bookkeeping about rows that failed validation."""

    stimuli: tuple[Stimulus, ...]
    n_dropped: int
    source_id: str

    def __len__(self) -> int:
        return len(self.stimuli)

    def __iter__(self):
        return iter(self.stimuli)


class FrequencyTable:
    """Word -> Zipf frequency score. Lookup of an absent word returns None,
    which is distinct from a stored score of zero."""

    def __init__(self, scores: dict[str, float], source_id: str = ""):
        self._scores = dict(scores)
        self.source_id = source_id

    def lookup(self, word: str) -> Optional[float]:
        return self._scores.get(normalize_text(word, lowercase=True))

    def __len__(self) -> int:
        return len(self._scores)

    def __contains__(self, word: str) -> bool:
        return self.lookup(word) is not None


@dataclass(frozen=True)
class MorphemeInventory:
    """Derivational affixes (prefixes and suffixes) retained above a
    row-occurrence share threshold; roots are excluded."""

    language: str
    morphemes: frozenset[str]
    source_row_count: int
    min_share: float

    def __len__(self) -> int:
        return len(self.morphemes)


def word_frequencies(corpora: Iterable[Corpus], lowercase: bool = True):
    """Whitespace pre-tokenization over one or more corpora: frequency table
    of word types. Multiple corpora realize joint multilingual training."""
    from collections import Counter

    counts: Counter[str] = Counter()
    for corpus in corpora:
        for sentence in corpus:
            counts.update(normalize_text(sentence, lowercase=lowercase).split())
    return counts


_TRUTHY = {"1", "true", "t", "yes", "y", "w", "word"}
_FALSY = {"0", "false", "f", "no", "n", "nw", "nonword", "non-word", "pseudoword", "pseudo"}


def load_corpus(path: str | Path, limit: Optional[int] = None, language: str = "und") -> Corpus:
    """Read up to `limit` non-empty lines from a UTF-8 text file, in file
    order, NFC-normalized. Raises DataError on unreadable files, invalid
    UTF-8 (with line number), or an empty corpus."""
    path = Path(path)
    sentences: list[str] = []
    try:
        raw = path.read_bytes()
    except OSError as e:
        raise DataError(f"cannot read corpus file {path}: {e}") from e
    for lineno, line in enumerate(raw.split(b"\n"), start=1):
        if limit is not None and len(sentences) >= limit:
            break
        try:
            text = line.decode("utf-8")
        except UnicodeDecodeError as e:
            raise DataError(f"{path}:{lineno}: invalid UTF-8 ({e.reason})") from e
        text = normalize_text(text).strip()
        if text:
            sentences.append(text)
    if not sentences:
        raise DataError(f"empty corpus: {path}")
    return Corpus(sentences=tuple(sentences), source_id=path.name, language=language)


def _sniff_delimiter(header_line: str) -> str:
    return "\t" if "\t" in header_line else ","


def load_lexical_decision(path: str | Path, schema: ColumnSchema) -> LexicalDecisionSet:
    """Load per-stimulus lexical-decision aggregates from a delimited file
    (comma or tab, sniffed from the header). Rows with missing or
    non-numeric RT/accuracy, out-of-range values, or unparseable word
    labels are dropped and counted."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise DataError(f"cannot read lexical-decision file {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: invalid UTF-8 ({e.reason})") from e
    lines = text.splitlines()
    if not lines:
        raise DataError(f"{path}: empty file")
    delim = _sniff_delimiter(lines[0])
    reader = csv.DictReader(lines, delimiter=delim)
    header = reader.fieldnames or []
    for col in (schema.sequence, schema.is_word, schema.rt, schema.accuracy):
        if col not in header:
            raise DataError(f"{path}: missing declared column {col!r} (header has {header})")

    stimuli: list[Stimulus] = []
    dropped = 0
    for row in reader:
        seq = normalize_text((row.get(schema.sequence) or "").strip())
        label = (row.get(schema.is_word) or "").strip().lower()
        if label in _TRUTHY:
            is_word = True
        elif label in _FALSY:
            is_word = False
        else:
            dropped += 1
            continue
        try:
            rt = float((row.get(schema.rt) or "").strip())
            acc = float((row.get(schema.accuracy) or "").strip())
        except ValueError:
            dropped += 1
            continue
        try:
            stimuli.append(Stimulus(sequence=seq, is_word=is_word, rt_ms=rt, accuracy=acc))
        except DataError:
            dropped += 1
    if not stimuli:
        raise DataError(f"{path}: zero surviving rows ({dropped} dropped)")
    if dropped:
        log.info("%s: dropped %d invalid rows, kept %d", path.name, dropped, len(stimuli))
    return LexicalDecisionSet(stimuli=tuple(stimuli), n_dropped=dropped, source_id=path.name)


def nearest_rank_percentile(values: Sequence[float], pct: float) -> float:
    """Nearest-rank percentile: the value at 1-based rank ceil(pct/100 * N)
    of the sorted sample (the minimum for pct = 0)."""
    if not values:
        raise DataError("percentile of empty sample")
    if not 0.0 <= pct <= 100.0:
        raise DataError(f"percentile must lie in [0, 100], got {pct}")
    ordered = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(ordered)))
    return ordered[rank - 1]


def rt_percentile_bounds(stimuli: Sequence[Stimulus], low: float,
                         high: float) -> tuple[float, float]:
    """Nearest-rank (low, high) percentile values of the stimulus RTs."""
    if not stimuli:
        raise DataError("cannot percentile-filter an empty stimulus list")
    if not (0.0 <= low < high <= 100.0):
        raise DataError(f"need 0 <= low < high <= 100, got low={low}, high={high}")
    rts = [s.rt_ms for s in stimuli]
    return nearest_rank_percentile(rts, low), nearest_rank_percentile(rts, high)


def filter_rt_range(stimuli: Sequence[Stimulus], lo_bound: float,
                    hi_bound: float) -> list[Stimulus]:
    """Drop stimuli with RT below lo_bound or above hi_bound; order
    preserved. Re-applying the same bounds is idempotent."""
    kept = [s for s in stimuli if lo_bound <= s.rt_ms <= hi_bound]
    if len(kept) < len(stimuli):
        log.info("RT filter: removed %d of %d stimuli (bounds %g..%g ms)",
                 len(stimuli) - len(kept), len(stimuli), lo_bound, hi_bound)
    return kept


def filter_rt_percentiles(stimuli: Sequence[Stimulus], low: float, high: float) -> list[Stimulus]:
    """Drop stimuli whose response time falls outside the nearest-rank
    [low, high] percentile bounds of the input RTs; order is preserved.
    low=0, high=100 keeps everything. Note the bounds come from the input
    sample: re-running on already-filtered data recomputes tighter bounds,
    so use filter_rt_range to re-apply the same cutoff values."""
    lo_bound, hi_bound = rt_percentile_bounds(stimuli, low, high)
    return filter_rt_range(stimuli, lo_bound, hi_bound)


def load_frequency_table(path: str | Path) -> FrequencyTable:
    """Load a two-column TSV of word and Zipf score. Keys are NFC-normalized
    and lowercased; on duplicate words the last row wins (with a warning)."""
    path = Path(path)
    scores: dict[str, float] = {}
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read frequency file {path}: {e}") from e
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 2:
            raise DataError(f"{path}:{lineno}: expected 2 tab-separated columns, got {len(parts)}")
        word = normalize_text(parts[0].strip(), lowercase=True)
        try:
            score = float(parts[1])
        except ValueError as e:
            raise DataError(f"{path}:{lineno}: malformed score {parts[1]!r}") from e
        if not math.isfinite(score):
            raise DataError(f"{path}:{lineno}: non-finite score {parts[1]!r}")
        if word in scores:
            log.warning("%s:%d: duplicate word %r, last occurrence wins", path.name, lineno, word)
        scores[word] = score
    if not scores:
        raise DataError(f"{path}: empty frequency table")
    return FrequencyTable(scores, source_id=path.name)


_AFFIX_TAGS = {"prefix", "suffix"}
_KNOWN_TAGS = {"prefix", "root", "suffix"}


def load_morpheme_inventory(path: str | Path, min_share: float, language: str = "und") -> MorphemeInventory:
    """Load a three-column TSV of word, pipe-separated morphemes, and
    pipe-separated parallel type tags (prefix/root/suffix). Retains the
    prefix and suffix morphemes that occur in at least `min_share` of the
    annotation rows; roots are always excluded."""
    path = Path(path)
    if not 0.0 <= min_share <= 1.0:
        raise DataError(f"min_share must lie in [0, 1], got {min_share}")
    try:
        lines = path.read_text(encoding="utf-8").splitlines()
    except OSError as e:
        raise DataError(f"cannot read morpheme file {path}: {e}") from e
    row_count = 0
    rows_with: dict[str, int] = {}
    for lineno, line in enumerate(lines, start=1):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise DataError(f"{path}:{lineno}: expected 3 tab-separated columns, got {len(parts)}")
        morphs = [normalize_text(m.strip(), lowercase=True) for m in parts[1].split("|")]
        tags = [t.strip().lower() for t in parts[2].split("|")]
        if len(morphs) != len(tags):
            raise DataError(f"{path}:{lineno}: {len(morphs)} morphemes but {len(tags)} type tags")
        for tag in tags:
            if tag not in _KNOWN_TAGS:
                raise DataError(f"{path}:{lineno}: unknown morpheme type tag {tag!r}")
        row_count += 1
        affixes_here = {m for m, t in zip(morphs, tags) if t in _AFFIX_TAGS and m}
        for m in affixes_here:
            rows_with[m] = rows_with.get(m, 0) + 1
    if row_count == 0:
        raise DataError(f"{path}: no annotation rows")
    kept = frozenset(m for m, c in rows_with.items() if c / row_count >= min_share)
    return MorphemeInventory(language=language, morphemes=kept,
                             source_row_count=row_count, min_share=min_share)
