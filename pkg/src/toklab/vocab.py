"""Vocabulary and tokenization types shared by the three algorithms, plus
model serialization and import of externally pretrained vocabulary files.

A trained model is immutable: encoding is a pure function of
(model, sequence), so concurrent encode calls are safe.
"""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from .errors import DataError, InternalError, ModelFormatError

log = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1
MAX_VOCAB_SIZE = 1_000_000

ALGO_BPE = "BPE"
ALGO_WPC = "WPC"
ALGO_UNI = "UNI"
ALGORITHMS = (ALGO_BPE, ALGO_WPC, ALGO_UNI)

DEFAULT_MARKER = "##"


def surface_form(tokens, marker: str) -> str:
    """Concatenate tokens back into the original character sequence,
    stripping the continuation marker from non-initial tokens that carry it.
    Marker characters never count as sequence characters."""
    parts = []
    for i, tok in enumerate(tokens):
        if marker and i > 0 and tok.startswith(marker):
            parts.append(tok[len(marker):])
        else:
            parts.append(tok)
    return "".join(parts)


@dataclass(frozen=True)
class TrainFlags:
    """Knobs shared by the trainers. Defaults follow the documented
    experiment setup: lowercased text, merged tokens capped at 32 chars,
    UnigramLM seeded at 10x the target and pruned by a quarter per round."""

    lowercase: bool = True
    max_token_chars: int = 32
    seed_factor: int = 10
    em_iters: int = 2
    prune_fraction: float = 0.25
    max_piece_chars: int = 20

    def as_dict(self) -> dict:
        return {
            "lowercase": self.lowercase,
            "max_token_chars": self.max_token_chars,
            "seed_factor": self.seed_factor,
            "em_iters": self.em_iters,
            "prune_fraction": self.prune_fraction,
            "max_piece_chars": self.max_piece_chars,
        }


def training_metadata(algorithm: str, corpora, target_size: int, flags: TrainFlags,
                      model_id: Optional[str] = None) -> dict:
    corpus_ids = [c.source_id for c in corpora]
    return {
        "model_id": model_id or f"{algorithm.lower()}-{target_size}",
        "corpus_ids": corpus_ids,
        "target_size": target_size,
        "flags": flags.as_dict(),
    }


@dataclass(frozen=True)
class Vocabulary:
    """Ordered token inventory. `tokens` order is the construction order
    (alphabet first, then merges/pruning survivors), which the nesting
    checks rely on."""

    tokens: tuple[str, ...]
    continuation_marker: str = DEFAULT_MARKER
    special_tokens: frozenset[str] = frozenset()
    alphabet: frozenset[str] = frozenset()
    _token_set: frozenset = field(init=False, repr=False, compare=False, default=frozenset())
    _max_token_chars: int = field(init=False, repr=False, compare=False, default=0)

    def __post_init__(self):
        token_set = frozenset(self.tokens)
        if len(token_set) != len(self.tokens):
            seen, dups = set(), set()
            for t in self.tokens:
                (dups if t in seen else seen).add(t)
            raise InternalError(f"duplicate vocabulary tokens: {sorted(dups)[:10]}")
        if len(self.tokens) > MAX_VOCAB_SIZE:
            raise DataError(f"vocabulary size {len(self.tokens)} exceeds maximum {MAX_VOCAB_SIZE}")
        missing = {c for c in self.alphabet if c not in token_set}
        if missing:
            raise InternalError(f"alphabet characters missing from tokens: {sorted(missing)[:10]}")
        object.__setattr__(self, "_token_set", token_set)
        object.__setattr__(self, "_max_token_chars",
                           max((len(t) for t in self.tokens), default=0))

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self._token_set

    def __len__(self) -> int:
        return len(self.tokens)

    @property
    def max_token_chars(self) -> int:
        return self._max_token_chars


@dataclass(frozen=True)
class Tokenization:
    """Result of encoding one character sequence: tokens t_1..t_k over
    characters c_1..c_n. Continuation markers are excluded from n and
    from the round-trip surface."""

    source: str
    tokens: tuple[str, ...]
    marker: str = DEFAULT_MARKER

    def __post_init__(self):
        if not self.source:
            raise DataError("cannot tokenize an empty sequence")
        if not self.tokens:
            raise InternalError("tokenization produced no tokens for a non-empty sequence")
        got = surface_form(self.tokens, self.marker)
        if got != self.source:
            raise InternalError(
                f"round-trip violation: tokens {self.tokens!r} concatenate to {got!r}, "
                f"expected {self.source!r}")
        if self.k > self.n:
            raise InternalError(f"token count {self.k} exceeds character count {self.n}")

    @property
    def n(self) -> int:
        """Character count of the source sequence (markers never counted)."""
        return len(self.source)

    @property
    def k(self) -> int:
        """Token count."""
        return len(self.tokens)


@dataclass(frozen=True, eq=False)
class TokenizerModel:
    """Trained tokenizer state: the vocabulary plus the algorithm-specific
    inference state (ordered merge list for BPE/WPC, scored lexicon for UNI).

    eq=False keeps instances identity-hashed so encoders can cache derived
    lookup tables per model without hashing 50k-token vocabularies.
    """

    algorithm: str
    vocabulary: Vocabulary
    merges: Optional[tuple[tuple[str, str], ...]] = None
    scores: Optional[dict[str, float]] = None
    metadata: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise DataError(f"unknown algorithm {self.algorithm!r}, expected one of {ALGORITHMS}")
        if self.algorithm == ALGO_UNI:
            if self.scores is None:
                raise InternalError("UNI model requires a scored lexicon")
        elif self.merges is None:
            raise InternalError(f"{self.algorithm} model requires a merge list")

    @property
    def model_id(self) -> str:
        return self.metadata.get("model_id", f"{self.algorithm.lower()}-{self.vocabulary.size}")

    @property
    def lowercase(self) -> bool:
        return bool(self.metadata.get("flags", {}).get("lowercase", False))

    def encode(self, sequence: str) -> Tokenization:
        return encode(self, sequence)


def encode(model: TokenizerModel, sequence: str) -> Tokenization:
    """Encode a single whitespace-free sequence with the model's algorithm.
    Characters outside the training alphabet come back as single-character
    fallback tokens, each counted in k."""
    if not sequence:
        raise DataError("cannot encode an empty sequence")
    if any(c.isspace() for c in sequence):
        raise DataError(f"encode expects a single whitespace-free sequence, got {sequence!r}")
    if model.algorithm == ALGO_BPE:
        from .bpe import encode_bpe
        return encode_bpe(model, sequence)
    if model.algorithm == ALGO_WPC:
        from .wordpiece import encode_wpc
        return encode_wpc(model, sequence)
    from .unigram import encode_uni
    return encode_uni(model, sequence)


def _payload(model: TokenizerModel) -> dict:
    return {
        "format": "toklab-model",
        "format_version": MODEL_FORMAT_VERSION,
        "algorithm": model.algorithm,
        "continuation_marker": model.vocabulary.continuation_marker,
        "tokens": list(model.vocabulary.tokens),
        "alphabet": sorted(model.vocabulary.alphabet),
        "special_tokens": sorted(model.vocabulary.special_tokens),
        "merges": [list(m) for m in model.merges] if model.merges is not None else None,
        "scores": sorted(model.scores.items()) if model.scores is not None else None,
        "metadata": model.metadata,
    }


def _checksum(payload: dict) -> str:
    canonical = json.dumps(payload, sort_keys=True, ensure_ascii=False,
                           separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def save_model(model: TokenizerModel, path: str | Path) -> Path:
    """Write the model as a single JSON document with a format version and
    a content checksum."""
    path = Path(path)
    payload = _payload(model)
    payload["checksum"] = _checksum({k: v for k, v in payload.items() if k != "checksum"})
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, ensure_ascii=False, indent=1), encoding="utf-8")
    return path


def load_model(path: str | Path) -> TokenizerModel:
    """Load a model saved by save_model, verifying version and checksum."""
    path = Path(path)
    try:
        doc = json.loads(path.read_text(encoding="utf-8"))
    except OSError as e:
        raise ModelFormatError(f"cannot read model file {path}: {e}") from e
    except (json.JSONDecodeError, UnicodeDecodeError) as e:
        raise ModelFormatError(f"{path}: not a valid model file ({e})") from e
    if not isinstance(doc, dict) or doc.get("format") != "toklab-model":
        raise ModelFormatError(f"{path}: not a toklab model file")
    version = doc.get("format_version")
    if version != MODEL_FORMAT_VERSION:
        raise ModelFormatError(
            f"{path}: model format version {version} unsupported "
            f"(this build reads version {MODEL_FORMAT_VERSION})")
    stored = doc.get("checksum")
    recomputed = _checksum({k: v for k, v in doc.items() if k != "checksum"})
    if stored != recomputed:
        raise ModelFormatError(f"{path}: checksum mismatch, file is corrupt or was edited")
    vocabulary = Vocabulary(
        tokens=tuple(doc["tokens"]),
        continuation_marker=doc["continuation_marker"],
        special_tokens=frozenset(doc["special_tokens"]),
        alphabet=frozenset(doc["alphabet"]),
    )
    merges = tuple((a, b) for a, b in doc["merges"]) if doc["merges"] is not None else None
    scores = {t: float(s) for t, s in doc["scores"]} if doc["scores"] is not None else None
    return TokenizerModel(algorithm=doc["algorithm"], vocabulary=vocabulary,
                          merges=merges, scores=scores, metadata=doc["metadata"])


EXTERNAL_FORMATS = ("wordpiece-list", "bpe-merges")


def import_external_vocab(path: str | Path, format: str,
                          continuation_marker: str = DEFAULT_MARKER) -> TokenizerModel:
    """Build a model from an externally exported vocabulary file.

    wordpiece-list: one token per line; inference is greedy longest match.
    bpe-merges: one "left right" pair per line, rank = line order;
    inference is ordered merge application. A leading "#version" line is
    ignored.
    """
    path = Path(path)
    if format not in EXTERNAL_FORMATS:
        raise DataError(f"unknown import format {format!r}, expected one of {EXTERNAL_FORMATS}")
    try:
        lines = path.read_text(encoding="utf-8").split("\n")
    except OSError as e:
        raise DataError(f"cannot read vocabulary file {path}: {e}") from e
    except UnicodeDecodeError as e:
        raise DataError(f"{path}: invalid UTF-8 ({e.reason})") from e
    if lines and lines[-1] == "":
        lines.pop()

    metadata = {
        "imported_from": path.name,
        "import_format": format,
        "model_id": f"import-{path.stem}",
        "flags": {"lowercase": False},
    }

    if format == "wordpiece-list":
        tokens: list[str] = []
        seen = set()
        for lineno, line in enumerate(lines, start=1):
            tok = line.rstrip("\r")
            if not tok or any(c.isspace() for c in tok):
                raise DataError(f"{path}:{lineno}: malformed token line {line!r}")
            if tok in seen:
                raise DataError(f"{path}:{lineno}: duplicate token {tok!r}")
            seen.add(tok)
            tokens.append(tok)
        alphabet = frozenset(t for t in tokens if len(t) == 1)
        vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker=continuation_marker,
                                alphabet=alphabet)
        return TokenizerModel(algorithm=ALGO_WPC, vocabulary=vocabulary,
                              merges=(), metadata=metadata)

    merges: list[tuple[str, str]] = []
    for lineno, line in enumerate(lines, start=1):
        text = line.rstrip("\r")
        if lineno == 1 and text.startswith("#version"):
            continue
        parts = text.split(" ")
        if len(parts) != 2 or not parts[0] or not parts[1]:
            raise DataError(f"{path}:{lineno}: malformed merge line {line!r}")
        merges.append((parts[0], parts[1]))
    alphabet = frozenset(c for pair in merges for part in pair for c in part)
    tokens = sorted(alphabet)
    seen = set(tokens)
    for left, right in merges:
        product = left + right
        if product not in seen:
            seen.add(product)
            tokens.append(product)
    vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker="",
                            alphabet=alphabet)
    return TokenizerModel(algorithm=ALGO_BPE, vocabulary=vocabulary,
                          merges=tuple(merges), metadata=metadata)


def export_token_list(model: TokenizerModel, path: str | Path) -> Path:
    """Write the vocabulary as a token-per-line list, interoperable with
    import_external_vocab(format="wordpiece-list")."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("\n".join(model.vocabulary.tokens) + "\n", encoding="utf-8")
    return path
