"""Experiment orchestration: cognitive correlation reports, vocabulary-size
sweeps with model caching, morpheme-coverage curves, and the
chunkability-versus-frequency regression comparison.

Per-stimulus metric rows are the unit of provenance: they are always
writable to CSV, and a correlation report is a pure function of that table,
so every reported number can be re-derived without re-encoding anything.
Words and non-words are never pooled into one correlation cell because the
effects have opposite signs by word class.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from . import stats
from .errors import DataError, StatsError, ToklabError
from .metrics import (METRIC_CHAR_LENGTH, METRIC_CHUNKABILITY,
                      METRIC_NUM_TOKENS, METRICS, char_length, chunkability,
                      num_tokens)
from .textio import Corpus, FrequencyTable, MorphemeInventory, Stimulus, normalize_text
from .vocab import (ALGO_BPE, ALGO_UNI, ALGO_WPC, TokenizerModel, TrainFlags,
                    Vocabulary, load_model, save_model)

log = logging.getLogger(__name__)

SIGNAL_RT = "rt"
SIGNAL_ACCURACY = "accuracy"
SIGNALS = (SIGNAL_RT, SIGNAL_ACCURACY)

CLASS_WORDS = "words"
CLASS_NONWORDS = "nonwords"
WORD_CLASSES = (CLASS_WORDS, CLASS_NONWORDS)

# Below this many observations a correlation is still reported but flagged:
# single-cell inferences at such sizes are not meaningful.
LOW_N_THRESHOLD = 30

DEFAULT_SIZE_GRID = (1000, 2000, 5000, 10000, 20000, 30000, 40000, 50000, 70000)


@dataclass(frozen=True)
class StimulusMetrics:
    """All metric values for one (stimulus, tokenizer) pair. The sequence
    is stored as encoded (after NFC and the model's lowercase flag)."""

    sequence: str
    is_word: bool
    rt_ms: float
    accuracy: float
    tokenizer_id: str
    vocab_size: int
    k: int
    n: int
    chunkability: float
    num_tokens: int
    char_length: int

    def signal(self, name: str) -> float:
        if name == SIGNAL_RT:
            return self.rt_ms
        if name == SIGNAL_ACCURACY:
            return self.accuracy
        raise DataError(f"unknown signal {name!r}, expected one of {SIGNALS}")

    def metric(self, name: str) -> float:
        if name == METRIC_CHUNKABILITY:
            return self.chunkability
        if name == METRIC_NUM_TOKENS:
            return float(self.num_tokens)
        if name == METRIC_CHAR_LENGTH:
            return float(self.char_length)
        raise DataError(f"unknown metric {name!r}, expected one of {METRICS}")


def compute_stimulus_metrics(models: Sequence[TokenizerModel],
                             stimuli: Sequence[Stimulus],
                             threads: int = 1) -> list[StimulusMetrics]:
    """Encode every stimulus with every model and compute all metrics.
    Models must agree on their normalization flags so the same surface
    string reaches each encoder. Models are immutable, so `threads` > 1
    encodes stimuli concurrently; row order is identical either way."""
    if not models:
        raise DataError("no models given")
    if not stimuli:
        raise DataError("no stimuli given")
    lowercase_flags = {m.lowercase for m in models}
    if len(lowercase_flags) > 1:
        raise DataError("models disagree on the lowercase flag; "
                        "evaluate them in separate runs")
    lowercase = lowercase_flags.pop()
    rows: list[StimulusMetrics] = []
    for model in models:
        mid = model.model_id
        msize = model.vocabulary.size

        def one(s: Stimulus, _model=model, _mid=mid, _msize=msize) -> StimulusMetrics:
            seq = normalize_text(s.sequence, lowercase=lowercase)
            t = _model.encode(seq)
            return StimulusMetrics(
                sequence=seq, is_word=s.is_word, rt_ms=s.rt_ms, accuracy=s.accuracy,
                tokenizer_id=_mid, vocab_size=_msize, k=t.k, n=t.n,
                chunkability=chunkability(t), num_tokens=num_tokens(t),
                char_length=char_length(seq))

        if threads > 1:
            from concurrent.futures import ThreadPoolExecutor

            with ThreadPoolExecutor(max_workers=threads) as pool:
                rows.extend(pool.map(one, stimuli))
        else:
            rows.extend(one(s) for s in stimuli)
    return rows


METRICS_CSV_FIELDS = ("sequence", "is_word", "rt_ms", "accuracy", "tokenizer_id",
                      "vocab_size", "k", "n", "chunkability", "num_tokens", "char_length")


def write_metrics_csv(rows: Sequence[StimulusMetrics], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(METRICS_CSV_FIELDS)
        for r in rows:
            writer.writerow([r.sequence, int(r.is_word), repr(r.rt_ms), repr(r.accuracy),
                             r.tokenizer_id, r.vocab_size, r.k, r.n,
                             repr(r.chunkability), r.num_tokens, r.char_length])
    return path


def read_metrics_csv(path: str | Path) -> list[StimulusMetrics]:
    path = Path(path)
    rows: list[StimulusMetrics] = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != list(METRICS_CSV_FIELDS):
            raise DataError(f"{path}: unexpected metrics header {reader.fieldnames}")
        for rec in reader:
            rows.append(StimulusMetrics(
                sequence=rec["sequence"], is_word=bool(int(rec["is_word"])),
                rt_ms=float(rec["rt_ms"]), accuracy=float(rec["accuracy"]),
                tokenizer_id=rec["tokenizer_id"], vocab_size=int(rec["vocab_size"]),
                k=int(rec["k"]), n=int(rec["n"]),
                chunkability=float(rec["chunkability"]),
                num_tokens=int(rec["num_tokens"]), char_length=int(rec["char_length"])))
    if not rows:
        raise DataError(f"{path}: empty metrics file")
    return rows


@dataclass(frozen=True)
class ReportRow:
    """One correlation cell: a (tokenizer, metric, signal, word-class)
    combination, its coefficient, and its significance comparisons."""

    dataset: str
    tokenizer_id: str
    vocab_size: int
    metric: str
    signal: str
    word_class: str
    r: Optional[float]
    n_obs: int
    skipped: bool
    skip_reason: Optional[str]
    low_n: bool
    vs_length: Optional[stats.SignificanceResult]
    pairwise: dict[str, Optional[stats.SignificanceResult]] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset, "tokenizer_id": self.tokenizer_id,
            "vocab_size": self.vocab_size, "metric": self.metric,
            "signal": self.signal, "word_class": self.word_class,
            "r": self.r, "n_obs": self.n_obs, "skipped": self.skipped,
            "skip_reason": self.skip_reason, "low_n": self.low_n,
            "vs_length": self.vs_length.as_dict() if self.vs_length else None,
            "pairwise": {k: (v.as_dict() if v else None)
                         for k, v in sorted(self.pairwise.items())},
        }


@dataclass(frozen=True)
class CorrelationReport:
    dataset: str
    rows: tuple[ReportRow, ...]
    n_words: int
    n_nonwords: int
    correlation: str = "pearson"

    def as_dict(self) -> dict:
        return {"dataset": self.dataset, "n_words": self.n_words,
                "n_nonwords": self.n_nonwords, "correlation": self.correlation,
                "rows": [r.as_dict() for r in self.rows]}

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, ensure_ascii=False, indent=1)

    def find(self, tokenizer_id: str, metric: str, signal: str,
             word_class: str) -> ReportRow:
        for row in self.rows:
            if (row.tokenizer_id == tokenizer_id and row.metric == metric
                    and row.signal == signal and row.word_class == word_class):
                return row
        raise KeyError((tokenizer_id, metric, signal, word_class))


def _correlate(corr_fn, x, y) -> float:
    return corr_fn(stats.paired(x, y))


def report_from_metrics(rows: Sequence[StimulusMetrics], dataset: str,
                        metrics: Sequence[str] = (METRIC_CHUNKABILITY,),
                        signals: Sequence[str] = SIGNALS,
                        correlation: str = "pearson") -> CorrelationReport:
    """Build the full correlation report from per-stimulus metric rows.
    Every requested (tokenizer, metric, signal, word-class) cell is present;
    cells that cannot be computed are marked skipped with a reason."""
    for m in metrics:
        if m not in METRICS:
            raise DataError(f"unknown metric {m!r}, expected one of {METRICS}")
    for s in signals:
        if s not in SIGNALS:
            raise DataError(f"unknown signal {s!r}, expected one of {SIGNALS}")
    if correlation == "pearson":
        corr_fn = stats.pearson
    elif correlation == "spearman":
        corr_fn = stats.spearman
    else:
        raise DataError(f"unknown correlation {correlation!r}")

    tokenizer_ids: list[str] = []
    sizes: dict[str, int] = {}
    for r in rows:
        if r.tokenizer_id not in sizes:
            tokenizer_ids.append(r.tokenizer_id)
            sizes[r.tokenizer_id] = r.vocab_size
    by_model_class: dict[tuple[str, str], list[StimulusMetrics]] = {}
    for r in rows:
        wc = CLASS_WORDS if r.is_word else CLASS_NONWORDS
        by_model_class.setdefault((r.tokenizer_id, wc), []).append(r)

    seqs = {r.sequence for r in rows}
    n_words = len({r.sequence for r in rows if r.is_word})
    n_nonwords = len(seqs) - n_words

    # r for every cell, plus the supporting vectors for significance tests
    cell_r: dict[tuple, Optional[float]] = {}
    cell_err: dict[tuple, str] = {}
    vectors: dict[tuple, tuple] = {}
    for tid in tokenizer_ids:
        for wc in WORD_CLASSES:
            cell_rows = by_model_class.get((tid, wc), [])
            for metric in dict.fromkeys(list(metrics) + [METRIC_CHAR_LENGTH]):
                for signal in signals:
                    key = (tid, metric, signal, wc)
                    x = [cr.metric(metric) for cr in cell_rows]
                    y = [cr.signal(signal) for cr in cell_rows]
                    vectors[key] = (x, y)
                    try:
                        cell_r[key] = _correlate(corr_fn, x, y)
                    except StatsError as e:
                        cell_r[key] = None
                        cell_err[key] = str(e)

    out: list[ReportRow] = []
    for tid in tokenizer_ids:
        for metric in metrics:
            for signal in signals:
                for wc in WORD_CLASSES:
                    key = (tid, metric, signal, wc)
                    x, y = vectors[key]
                    n_obs = len(x)
                    r_val = cell_r[key]
                    skipped = r_val is None
                    reason = cell_err.get(key)
                    vs_length = None
                    pairwise: dict[str, Optional[stats.SignificanceResult]] = {}
                    if not skipped and metric != METRIC_CHAR_LENGTH:
                        r_len = cell_r.get((tid, METRIC_CHAR_LENGTH, signal, wc))
                        if r_len is not None:
                            try:
                                r12 = _correlate(
                                    corr_fn, x,
                                    vectors[(tid, METRIC_CHAR_LENGTH, signal, wc)][0])
                                vs_length = stats.compare_dependent_correlations(
                                    r_val, r_len, r12, n_obs)
                            except StatsError:
                                vs_length = None
                    if not skipped:
                        for other in tokenizer_ids:
                            if other == tid:
                                continue
                            r_other = cell_r.get((other, metric, signal, wc))
                            sig = None
                            if r_other is not None:
                                try:
                                    r12 = _correlate(
                                        corr_fn, x,
                                        vectors[(other, metric, signal, wc)][0])
                                    sig = stats.compare_dependent_correlations(
                                        r_val, r_other, r12, n_obs)
                                except StatsError:
                                    sig = None
                            pairwise[other] = sig
                    out.append(ReportRow(
                        dataset=dataset, tokenizer_id=tid, vocab_size=sizes[tid],
                        metric=metric, signal=signal, word_class=wc,
                        r=r_val, n_obs=n_obs, skipped=skipped, skip_reason=reason,
                        low_n=n_obs < LOW_N_THRESHOLD, vs_length=vs_length,
                        pairwise=pairwise))
    return CorrelationReport(dataset=dataset, rows=tuple(out), n_words=n_words,
                             n_nonwords=n_nonwords, correlation=correlation)


def run_cognitive_eval(models: Sequence[TokenizerModel], stimuli: Sequence[Stimulus],
                       metrics: Sequence[str] = (METRIC_CHUNKABILITY,),
                       signals: Sequence[str] = SIGNALS,
                       dataset: str = "dataset",
                       correlation: str = "pearson"):
    """Encode, compute metrics, and correlate per word class. Returns
    (CorrelationReport, per-stimulus metric rows)."""
    classes = {s.is_word for s in stimuli}
    if classes != {True, False}:
        missing = CLASS_NONWORDS if classes == {True} else CLASS_WORDS
        raise DataError(f"empty word-class partition: no {missing} in the stimuli")
    rows = compute_stimulus_metrics(models, stimuli)
    report = report_from_metrics(rows, dataset=dataset, metrics=metrics,
                                 signals=signals, correlation=correlation)
    return report, rows


REPORT_CSV_FIELDS = ("dataset", "tokenizer_id", "vocab_size", "metric", "signal",
                     "word_class", "r", "n_obs", "skipped", "skip_reason", "low_n",
                     "vs_length_test", "vs_length_z", "vs_length_p")


def write_report_csv(report: CorrelationReport, path: str | Path) -> Path:
    """CSV mirror of the report rows (pairwise results go to a second file
    next to it, suffixed _pairwise)."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(REPORT_CSV_FIELDS)
        for row in report.rows:
            sig = row.vs_length
            writer.writerow([
                row.dataset, row.tokenizer_id, row.vocab_size, row.metric, row.signal,
                row.word_class, "" if row.r is None else repr(row.r), row.n_obs,
                int(row.skipped), row.skip_reason or "", int(row.low_n),
                sig.test if sig else "", repr(sig.statistic) if sig else "",
                repr(sig.p_value) if sig else ""])
    pairwise_path = path.with_name(path.stem + "_pairwise.csv")
    with pairwise_path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("dataset", "metric", "signal", "word_class",
                         "tokenizer_a", "tokenizer_b", "test", "z", "p"))
        for row in report.rows:
            for other, sig in sorted(row.pairwise.items()):
                if sig is None:
                    continue
                writer.writerow([row.dataset, row.metric, row.signal, row.word_class,
                                 row.tokenizer_id, other, sig.test,
                                 repr(sig.statistic), repr(sig.p_value)])
    return path


# ---------------------------------------------------------------------------
# Vocabulary-size sweeps


@dataclass(frozen=True)
class TrainerConfig:
    """Everything needed to train one algorithm at any vocabulary size."""

    algorithm: str
    corpora: tuple[Corpus, ...]
    flags: TrainFlags = TrainFlags()
    cache_dir: Optional[Path] = None


class SweepError(ToklabError):
    """Training failed mid-sweep; completed sizes are preserved."""

    def __init__(self, message: str, partial: "SweepResult"):
        super().__init__(message)
        self.partial = partial


@dataclass(frozen=True)
class SweepResult:
    algorithm: str
    points: tuple[tuple[int, CorrelationReport], ...]

    def sizes(self) -> list[int]:
        return [size for size, _ in self.points]


def train_model(config: TrainerConfig, size: int) -> TokenizerModel:
    from .bpe import train_bpe
    from .unigram import train_uni
    from .wordpiece import train_wpc

    algo = config.algorithm.upper()
    if algo == ALGO_BPE:
        return train_bpe(config.corpora, size, config.flags)
    if algo == ALGO_WPC:
        return train_wpc(config.corpora, size, config.flags)
    if algo == ALGO_UNI:
        return train_uni(config.corpora, size, config.flags)
    raise DataError(f"unknown algorithm {config.algorithm!r}")


def corpus_fingerprint(corpus: Corpus) -> str:
    digest = hashlib.sha256("\n".join(corpus.sentences).encode("utf-8"))
    return digest.hexdigest()


def _cache_key(config: TrainerConfig, size: int) -> str:
    doc = {"algorithm": config.algorithm.upper(),
           "corpora": [corpus_fingerprint(c) for c in config.corpora],
           "size": size, "flags": config.flags.as_dict()}
    return hashlib.sha256(json.dumps(doc, sort_keys=True).encode()).hexdigest()[:24]


def train_or_load_cached(config: TrainerConfig, size: int) -> TokenizerModel:
    """Train a model, or reuse the cached one keyed by
    (corpus hashes, algorithm, size, flags)."""
    if config.cache_dir is None:
        return train_model(config, size)
    cache_path = Path(config.cache_dir) / f"{config.algorithm.lower()}-{size}-{_cache_key(config, size)}.json"
    if cache_path.exists():
        log.info("sweep cache hit: %s", cache_path.name)
        return load_model(cache_path)
    model = train_model(config, size)
    save_model(model, cache_path)
    return model


def run_sweep(config: TrainerConfig, sizes: Sequence[int], stimuli: Sequence[Stimulus],
              metrics: Sequence[str] = (METRIC_CHUNKABILITY,),
              signals: Sequence[str] = SIGNALS,
              dataset: str = "dataset") -> SweepResult:
    """Train (or load cached) one model per vocabulary size and produce a
    correlation report for each. A failure at any size raises SweepError
    carrying the completed points."""
    sizes = list(sizes)
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError(f"sweep sizes must be strictly increasing, got {sizes}")
    points: list[tuple[int, CorrelationReport]] = []
    for size in sizes:
        try:
            model = train_or_load_cached(config, size)
            report, _ = run_cognitive_eval([model], stimuli, metrics=metrics,
                                           signals=signals, dataset=dataset)
        except (ToklabError, OSError) as e:
            partial = SweepResult(algorithm=config.algorithm.upper(), points=tuple(points))
            raise SweepError(f"sweep failed at size {size}: {e}", partial) from e
        points.append((size, report))
    return SweepResult(algorithm=config.algorithm.upper(), points=tuple(points))


def write_sweep_csv(result: SweepResult, path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("vocab_size",) + REPORT_CSV_FIELDS)
        for size, report in result.points:
            for row in report.rows:
                sig = row.vs_length
                writer.writerow([
                    size, row.dataset, row.tokenizer_id, row.vocab_size, row.metric,
                    row.signal, row.word_class, "" if row.r is None else repr(row.r),
                    row.n_obs, int(row.skipped), row.skip_reason or "", int(row.low_n),
                    sig.test if sig else "", repr(sig.statistic) if sig else "",
                    repr(sig.p_value) if sig else ""])
    return path


# ---------------------------------------------------------------------------
# Morpheme coverage


def morph_coverage(vocabulary: Vocabulary, inventory: MorphemeInventory) -> float:
    """Fraction of inventory morphemes present in the vocabulary, either
    bare or with the continuation marker prefixed."""
    if not inventory.morphemes:
        raise DataError("empty morpheme inventory")
    marker = vocabulary.continuation_marker
    covered = sum(1 for m in inventory.morphemes
                  if m in vocabulary or (marker and (marker + m) in vocabulary))
    return covered / len(inventory.morphemes)


@dataclass(frozen=True)
class CoverageCurve:
    language: str
    algorithm: str
    points: tuple[tuple[int, float], ...]   # (vocab_size, covered_fraction)


def coverage_curve(models: Sequence[TokenizerModel],
                   inventory: MorphemeInventory) -> CoverageCurve:
    """Coverage across models of one algorithm, ordered by vocabulary size."""
    if not models:
        raise DataError("no models given")
    algos = {m.algorithm for m in models}
    if len(algos) > 1:
        raise DataError(f"coverage curve mixes algorithms: {sorted(algos)}")
    ordered = sorted(models, key=lambda m: m.vocabulary.size)
    pts = []
    for m in ordered:
        pts.append((m.vocabulary.size, morph_coverage(m.vocabulary, inventory)))
    sizes = [s for s, _ in pts]
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise DataError(f"coverage curve needs distinct vocabulary sizes, got {sizes}")
    return CoverageCurve(language=inventory.language, algorithm=algos.pop(),
                         points=tuple(pts))


def write_coverage_csv(curves: Sequence[CoverageCurve], path: str | Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("language", "algorithm", "vocab_size", "covered_fraction"))
        for curve in curves:
            for size, frac in curve.points:
                writer.writerow([curve.language, curve.algorithm, size, repr(frac)])
    return path


# ---------------------------------------------------------------------------
# Regression comparison (chunkability vs word frequency)

FEATURE_CHUNKABILITY = "chunkability"
FEATURE_FREQUENCY = "frequency"
FEATURES = (FEATURE_CHUNKABILITY, FEATURE_FREQUENCY)


@dataclass(frozen=True)
class RegressionReport:
    dataset: str
    tokenizer_id: str
    seed: int
    n_words_used: int
    n_dropped_no_frequency: int
    results: dict[tuple[str, str], stats.RegressionResult]   # (signal, feature) -> result

    def as_dict(self) -> dict:
        return {
            "dataset": self.dataset, "tokenizer_id": self.tokenizer_id,
            "seed": self.seed, "n_words_used": self.n_words_used,
            "n_dropped_no_frequency": self.n_dropped_no_frequency,
            "results": {f"{sig}/{feat}": res.as_dict()
                        for (sig, feat), res in sorted(self.results.items())},
        }

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), sort_keys=True, ensure_ascii=False, indent=1)


def run_regression(stimuli: Sequence[Stimulus], model: TokenizerModel,
                   frequency: FrequencyTable, seed: int = 13,
                   dataset: str = "dataset") -> RegressionReport:
    """Predict each min-max-scaled signal from chunkability and, separately,
    from Zipf word frequency, with the identical seeded 80/20 split. Words
    without a frequency entry are dropped and counted; non-words are ignored
    (frequency is only defined for words)."""
    words = [s for s in stimuli if s.is_word]
    kept: list[Stimulus] = []
    freqs: list[float] = []
    dropped = 0
    for s in words:
        score = frequency.lookup(s.sequence)
        if score is None:
            dropped += 1
        else:
            kept.append(s)
            freqs.append(score)
    if len(kept) < 10:
        raise DataError(
            f"too few frequency-covered words: {len(kept)} (need >= 10, "
            f"{dropped} words had no frequency entry)")
    chunk_vals = []
    for s in kept:
        seq = normalize_text(s.sequence, lowercase=model.lowercase)
        chunk_vals.append(chunkability(model.encode(seq)))
    feature_vectors = {FEATURE_CHUNKABILITY: chunk_vals, FEATURE_FREQUENCY: freqs}
    results: dict[tuple[str, str], stats.RegressionResult] = {}
    for signal in SIGNALS:
        raw = [s.rt_ms if signal == SIGNAL_RT else s.accuracy for s in kept]
        scaled = stats.minmax_scale(raw)
        for feature, vec in feature_vectors.items():
            results[(signal, feature)] = stats.linreg_holdout(vec, scaled, 0.8, seed)
    return RegressionReport(dataset=dataset, tokenizer_id=model.model_id, seed=seed,
                            n_words_used=len(kept), n_dropped_no_frequency=dropped,
                            results=results)
