"""toklab command line: train / encode / chunk / eval / sweep / morph /
regress.

Exit codes: 0 success, 1 usage error, 2 data error, 3 internal invariant
violation. Diagnostics go to stderr; every run writes a resolved-config
snapshot (with the tool and model-format versions) into its output
directory, and report commands render matplotlib figures next to their
delimited outputs unless --no-figures is given.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import __version__
from .errors import DataError, InternalError, ToklabError, UsageError
from .evalpipe import (DEFAULT_SIZE_GRID, SweepError, TrainerConfig,
                       compute_stimulus_metrics, coverage_curve,
                       report_from_metrics, run_regression, run_sweep,
                       train_or_load_cached, write_coverage_csv,
                       write_metrics_csv, write_report_csv, write_sweep_csv)
from .metrics import METRIC_CHAR_LENGTH, METRIC_CHUNKABILITY, METRIC_NUM_TOKENS
from .textio import (ColumnSchema, filter_rt_percentiles, load_corpus,
                     load_frequency_table, load_lexical_decision,
                     load_morpheme_inventory, normalize_text)
from .vocab import (MODEL_FORMAT_VERSION, TrainFlags, export_token_list,
                    import_external_vocab, load_model, save_model)

log = logging.getLogger("toklab")

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_INTERNAL = 3

_METRIC_ALIASES = {
    "chunkability": METRIC_CHUNKABILITY,
    "num-tokens": METRIC_NUM_TOKENS,
    "num_tokens": METRIC_NUM_TOKENS,
    "length": METRIC_CHAR_LENGTH,
    "char_length": METRIC_CHAR_LENGTH,
}
_SIGNAL_ALIASES = {"rt": "rt", "acc": "accuracy", "accuracy": "accuracy"}


def _parse_metrics(spec: str) -> list[str]:
    out = []
    for name in spec.split(","):
        name = name.strip()
        if name not in _METRIC_ALIASES:
            raise UsageError(f"unknown metric {name!r} (choices: {sorted(_METRIC_ALIASES)})")
        out.append(_METRIC_ALIASES[name])
    return list(dict.fromkeys(out))


def _parse_signals(spec: str) -> list[str]:
    out = []
    for name in spec.split(","):
        name = name.strip()
        if name not in _SIGNAL_ALIASES:
            raise UsageError(f"unknown signal {name!r} (choices: {sorted(_SIGNAL_ALIASES)})")
        out.append(_SIGNAL_ALIASES[name])
    return list(dict.fromkeys(out))


def _parse_sizes(spec: str) -> list[int]:
    try:
        sizes = sorted({int(s.strip()) for s in spec.split(",") if s.strip()})
    except ValueError as e:
        raise UsageError(f"bad size list {spec!r}: {e}") from e
    if not sizes:
        raise UsageError("empty size list")
    return sizes


def read_config_file(path: str | Path) -> dict[str, str]:
    """Key-value config: one `key = value` per line, # comments allowed.
    Keys use the long flag names without the leading dashes."""
    out: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise UsageError(f"{path}:{lineno}: expected 'key = value', got {line!r}")
        key, value = text.split("=", 1)
        out[key.strip().replace("-", "_")] = value.strip()
    return out


def _iter_all_parsers(parser: argparse.ArgumentParser):
    yield parser
    for action in parser._actions:
        if isinstance(action, argparse._SubParsersAction):
            for sub in action.choices.values():
                yield from _iter_all_parsers(sub)


def _apply_config_defaults(parser: argparse.ArgumentParser, argv: list[str]) -> list[str]:
    """If --config FILE appears in argv, load it and install its values as
    parser defaults so explicit flags still win. Required flags satisfied by
    the config stop being required."""
    if "--config" not in argv:
        return argv
    idx = argv.index("--config")
    if idx + 1 >= len(argv):
        raise UsageError("--config needs a file argument")
    cfg_path = argv[idx + 1]
    argv = argv[:idx] + argv[idx + 2:]
    try:
        values = read_config_file(cfg_path)
    except OSError as e:
        raise UsageError(f"cannot read config file {cfg_path}: {e}") from e
    for p in _iter_all_parsers(parser):
        p.set_defaults(**values)
        for action in p._actions:
            if action.dest in values and action.required:
                action.required = False
    return argv


def _coerce_config_types(args: argparse.Namespace) -> None:
    """Config-file values arrive as strings; coerce the common numeric and
    boolean options in place."""
    for name in ("vocab_size", "limit", "seed", "em_iters", "seed_factor", "threads"):
        v = getattr(args, name, None)
        if isinstance(v, str):
            setattr(args, name, int(v))
    for name in ("prune_fraction", "min_share"):
        v = getattr(args, name, None)
        if isinstance(v, str):
            setattr(args, name, float(v))
    for name in ("lowercase", "figures"):
        v = getattr(args, name, None)
        if isinstance(v, str):
            setattr(args, name, v.strip().lower() in ("1", "true", "yes", "on"))


def _as_list(value) -> list:
    """Append flags hold lists from argv but bare strings from a config file."""
    return value if isinstance(value, list) else [value]


def _schema_from_args(args) -> ColumnSchema:
    return ColumnSchema(sequence=args.col_seq, is_word=args.col_word,
                        rt=args.col_rt, accuracy=args.col_acc)


def _load_stimuli(args):
    data = load_lexical_decision(args.data, _schema_from_args(args))
    stimuli = list(data.stimuli)
    if getattr(args, "rt_percentiles", None):
        parts = args.rt_percentiles.split(",")
        if len(parts) != 2:
            raise UsageError(f"--rt-percentiles expects 'low,high', got {args.rt_percentiles!r}")
        stimuli = filter_rt_percentiles(stimuli, float(parts[0]), float(parts[1]))
    return stimuli


def _flags_from_args(args) -> TrainFlags:
    return TrainFlags(
        lowercase=args.lowercase,
        seed_factor=getattr(args, "seed_factor", 10),
        em_iters=getattr(args, "em_iters", 2),
        prune_fraction=getattr(args, "prune_fraction", 0.25),
    )


def _snapshot(args, out_dir: Path, extra: dict | None = None) -> None:
    """Resolved-config snapshot alongside the outputs: reruns with an
    identical snapshot must produce byte-identical reports."""
    out_dir.mkdir(parents=True, exist_ok=True)
    resolved = {k: (str(v) if isinstance(v, Path) else v)
                for k, v in sorted(vars(args).items()) if k != "func"}
    doc = {"tool_version": __version__, "model_format_version": MODEL_FORMAT_VERSION,
           "command": args.command, "resolved": resolved}
    if extra:
        doc.update(extra)
    path = out_dir / f"{args.command}_config.json"
    path.write_text(json.dumps(doc, sort_keys=True, indent=1), encoding="utf-8")


def _maybe_figures(args) -> bool:
    return bool(getattr(args, "figures", True))


# ---------------------------------------------------------------------------
# Subcommand handlers


def cmd_train(args) -> int:
    corpora = [load_corpus(p, limit=args.limit) for p in _as_list(args.corpus)]
    flags = _flags_from_args(args)
    config = TrainerConfig(algorithm=args.algo, corpora=tuple(corpora), flags=flags)
    model = train_or_load_cached(config, args.vocab_size)
    out = Path(args.out)
    save_model(model, out)
    if args.export_vocab:
        export_token_list(model, args.export_vocab)
    _snapshot(args, out.parent if out.parent != Path("") else Path("."))
    log.info("wrote %s (%d tokens)", out, model.vocabulary.size)
    return EXIT_OK


def cmd_encode(args) -> int:
    model = _load_any_model(args)
    sequences: list[str] = []
    if args.text:
        sequences.extend(args.text)
    if args.input:
        sequences.extend(l.strip() for l in Path(args.input).read_text(encoding="utf-8").splitlines()
                         if l.strip())
    if not sequences:
        raise UsageError("nothing to encode: pass --text or --input")
    lines = []
    for seq in sequences:
        words = normalize_text(seq, lowercase=model.lowercase).split()
        if not words:
            raise UsageError(f"nothing to encode in {seq!r}")
        tokens = []
        for w in words:   # whitespace pre-tokenization happens here, per word
            tokens.extend(model.encode(w).tokens)
        lines.append(" ".join(tokens))
    payload = "\n".join(lines) + "\n"
    if args.out:
        Path(args.out).write_text(payload, encoding="utf-8")
    else:
        sys.stdout.write(payload)
    return EXIT_OK


def _load_any_model(args):
    if getattr(args, "import_format", None):
        return import_external_vocab(args.model, args.import_format)
    return load_model(args.model)


def cmd_chunk(args) -> int:
    model = _load_any_model(args)
    stimuli = _load_stimuli(args)
    rows = compute_stimulus_metrics([model], stimuli, threads=args.threads)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    with out.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(("stimulus", "k", "n", "chunkability", "num_tokens", "char_length"))
        for r in rows:
            writer.writerow([r.sequence, r.k, r.n, repr(r.chunkability),
                             r.num_tokens, r.char_length])
    _snapshot(args, out.parent)
    log.info("wrote %s (%d stimuli)", out, len(rows))
    return EXIT_OK


def cmd_eval(args) -> int:
    models = []
    for p in _as_list(args.model):
        models.append(import_external_vocab(p, args.import_format)
                      if args.import_format else load_model(p))
    stimuli = _load_stimuli(args)
    metrics = _parse_metrics(args.metrics)
    signals = _parse_signals(args.signals)
    dataset = args.dataset or Path(args.data).stem
    rows = compute_stimulus_metrics(models, stimuli, threads=args.threads)
    report = report_from_metrics(rows, dataset=dataset, metrics=metrics,
                                 signals=signals, correlation=args.correlation)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding="utf-8")
    write_report_csv(report, out.with_suffix(".csv"))
    write_metrics_csv(rows, out.with_name(out.stem + "_stimulus_metrics.csv"))
    if _maybe_figures(args):
        from .figures import plot_correlation_report
        plot_correlation_report(report, out.with_suffix(".png"), metric=metrics[0])
    _snapshot(args, out.parent)
    log.info("wrote %s (%d rows)", out, len(report.rows))
    return EXIT_OK


def cmd_sweep(args) -> int:
    corpora = [load_corpus(p, limit=args.limit) for p in _as_list(args.corpus)]
    stimuli = _load_stimuli(args)
    flags = _flags_from_args(args)
    out_dir = Path(args.out_dir)
    cache_dir = Path(args.cache_dir) if args.cache_dir else None
    config = TrainerConfig(algorithm=args.algo, corpora=tuple(corpora),
                           flags=flags, cache_dir=cache_dir)
    sizes = _parse_sizes(args.sizes) if args.sizes else list(DEFAULT_SIZE_GRID)
    metrics = _parse_metrics(args.metrics)
    signals = _parse_signals(args.signals)
    dataset = args.dataset or Path(args.data).stem
    try:
        result = run_sweep(config, sizes, stimuli, metrics=metrics,
                           signals=signals, dataset=dataset)
        partial = False
    except SweepError as e:
        log.error("%s; writing partial results", e)
        result = e.partial
        partial = True
    out_dir.mkdir(parents=True, exist_ok=True)
    write_sweep_csv(result, out_dir / "sweep.csv")
    for size, report in result.points:
        (out_dir / f"report_{size}.json").write_text(report.to_json(), encoding="utf-8")
    if _maybe_figures(args) and result.points:
        from .figures import plot_sweep
        plot_sweep(result, out_dir / "sweep.png", metric=metrics[0])
    _snapshot(args, out_dir, extra={"completed_sizes": result.sizes()})
    if partial:
        return EXIT_DATA
    log.info("sweep complete: %s", result.sizes())
    return EXIT_OK


def cmd_morph(args) -> int:
    models = [load_model(p) for p in _as_list(args.model)]
    inventory = load_morpheme_inventory(args.morphemes, min_share=args.min_share,
                                        language=args.language)
    by_algo: dict[str, list] = {}
    for m in models:
        by_algo.setdefault(m.algorithm, []).append(m)
    curves = [coverage_curve(ms, inventory) for _, ms in sorted(by_algo.items())]
    out = Path(args.out)
    write_coverage_csv(curves, out)
    if _maybe_figures(args):
        from .figures import plot_coverage
        plot_coverage(curves, out.with_suffix(".png"))
    _snapshot(args, out.parent)
    for curve in curves:
        for size, frac in curve.points:
            log.info("%s %s @ %d: coverage %.3f", curve.language, curve.algorithm,
                     size, frac)
    return EXIT_OK


def cmd_regress(args) -> int:
    model = _load_any_model(args)
    stimuli = _load_stimuli(args)
    table = load_frequency_table(args.freq)
    dataset = args.dataset or Path(args.data).stem
    report = run_regression(stimuli, model, table, seed=args.seed, dataset=dataset)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(report.to_json(), encoding="utf-8")
    if _maybe_figures(args):
        from .figures import plot_regression
        plot_regression(report, out.with_suffix(".png"))
    _snapshot(args, out.parent)
    log.info("wrote %s (%d words used, %d lacking frequency)",
             out, report.n_words_used, report.n_dropped_no_frequency)
    return EXIT_OK


# ---------------------------------------------------------------------------
# Parser


def _add_stimulus_flags(p: argparse.ArgumentParser, data_aliases: tuple = ()) -> None:
    p.add_argument("--data", *data_aliases, dest="data", required=True,
                   help="lexical-decision CSV/TSV with header")
    p.add_argument("--col-seq", default="sequence", help="column with the letter string")
    p.add_argument("--col-word", default="is_word", help="column with the word/non-word label")
    p.add_argument("--col-rt", default="rt", help="column with mean response time (ms)")
    p.add_argument("--col-acc", default="accuracy", help="column with mean accuracy")
    p.add_argument("--rt-percentiles", default=None, metavar="LOW,HIGH",
                   help="drop stimuli outside these nearest-rank RT percentiles (e.g. 1,99)")


def _add_figure_flag(p: argparse.ArgumentParser) -> None:
    p.add_argument("--figures", dest="figures", action="store_true", default=True,
                   help="render PNG figures next to the outputs (default)")
    p.add_argument("--no-figures", dest="figures", action="store_false",
                   help="skip figure rendering")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toklab",
        description="Train subword tokenizers and evaluate their fit to lexical-decision data.")
    parser.add_argument("--version", action="version",
                        version=f"toklab {__version__} (model format {MODEL_FORMAT_VERSION})")
    parser.add_argument("--verbose", "-v", action="store_true", help="debug logging")
    parser.add_argument("--quiet", "-q", action="store_true", help="warnings only")
    parser.add_argument("--threads", type=int, default=1,
                        help="worker threads for encoding batches (default 1)")
    sub = parser.add_subparsers(dest="command", metavar="COMMAND")

    p = sub.add_parser("train", help="train a tokenizer on one or more corpora")
    p.add_argument("--algo", required=True, choices=("bpe", "wpc", "uni"))
    p.add_argument("--vocab-size", type=int, required=True)
    p.add_argument("--corpus", action="append", required=True,
                   help="UTF-8 text, one sentence per line (repeatable for joint training)")
    p.add_argument("--out", required=True, help="model JSON path")
    p.add_argument("--limit", type=int, default=None, help="max corpus lines to read")
    p.add_argument("--lowercase", dest="lowercase", action="store_true", default=True)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false")
    p.add_argument("--seed-factor", type=int, default=10, help="UNI seed size multiplier")
    p.add_argument("--em-iters", type=int, default=2, help="UNI EM rounds per prune round")
    p.add_argument("--prune-fraction", type=float, default=0.25,
                   help="UNI fraction of prunable tokens removed per round")
    p.add_argument("--export-vocab", default=None,
                   help="also write the vocabulary as a token-per-line list")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("encode", help="tokenize sequences with a trained model")
    p.add_argument("--model", required=True)
    p.add_argument("--import-format", choices=("wordpiece-list", "bpe-merges"), default=None,
                   help="treat --model as an external vocabulary file")
    p.add_argument("--text", action="append", help="sequence to encode (repeatable)")
    p.add_argument("--input", default=None, help="file with one sequence per line")
    p.add_argument("--out", default=None, help="write token lines here instead of stdout")
    p.set_defaults(func=cmd_encode)

    p = sub.add_parser("chunk", help="per-stimulus metrics CSV for one model")
    p.add_argument("--model", required=True)
    p.add_argument("--import-format", choices=("wordpiece-list", "bpe-merges"), default=None)
    _add_stimulus_flags(p, data_aliases=("--input",))
    p.add_argument("--out", required=True, help="metrics CSV path")
    p.set_defaults(func=cmd_chunk)

    p = sub.add_parser("eval", help="correlation report for one or more models")
    p.add_argument("--model", action="append", required=True, help="model JSON (repeatable)")
    p.add_argument("--import-format", choices=("wordpiece-list", "bpe-merges"), default=None)
    _add_stimulus_flags(p)
    p.add_argument("--metrics", default="chunkability",
                   help="comma list: chunkability,num-tokens,length")
    p.add_argument("--signals", default="rt,acc", help="comma list: rt,acc")
    p.add_argument("--correlation", choices=("pearson", "spearman"), default="pearson")
    p.add_argument("--dataset", default=None, help="dataset label in the report")
    p.add_argument("--out", required=True, help="report JSON path (CSV mirror written too)")
    _add_figure_flag(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("sweep", help="train across vocabulary sizes and report each")
    p.add_argument("--algo", required=True, choices=("bpe", "wpc", "uni"))
    p.add_argument("--sizes", default=None,
                   help=f"comma list of vocabulary sizes (default {','.join(map(str, DEFAULT_SIZE_GRID))})")
    p.add_argument("--corpus", action="append", required=True)
    p.add_argument("--limit", type=int, default=None)
    _add_stimulus_flags(p)
    p.add_argument("--metrics", default="chunkability")
    p.add_argument("--signals", default="rt,acc")
    p.add_argument("--lowercase", dest="lowercase", action="store_true", default=True)
    p.add_argument("--no-lowercase", dest="lowercase", action="store_false")
    p.add_argument("--seed-factor", type=int, default=10)
    p.add_argument("--em-iters", type=int, default=2)
    p.add_argument("--prune-fraction", type=float, default=0.25)
    p.add_argument("--cache-dir", default=None, help="reuse models across sweeps")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out-dir", required=True)
    _add_figure_flag(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("morph", help="morpheme coverage of trained vocabularies")
    p.add_argument("--model", action="append", required=True,
                   help="model JSON (repeat across sizes for a curve)")
    p.add_argument("--morphemes", required=True,
                   help="TSV: word, pipe-separated morphemes, pipe-separated prefix/root/suffix tags")
    p.add_argument("--min-share", type=float, default=0.001,
                   help="minimum row-occurrence share for a morpheme (default 0.001)")
    p.add_argument("--language", default="und")
    p.add_argument("--out", required=True, help="coverage CSV path")
    _add_figure_flag(p)
    p.set_defaults(func=cmd_morph)

    p = sub.add_parser("regress", help="chunkability vs frequency regression on words")
    p.add_argument("--model", required=True)
    p.add_argument("--import-format", choices=("wordpiece-list", "bpe-merges"), default=None)
    _add_stimulus_flags(p)
    p.add_argument("--freq", required=True, help="two-column TSV: word, Zipf score")
    p.add_argument("--seed", type=int, default=13, help="train/test split seed")
    p.add_argument("--dataset", default=None)
    p.add_argument("--out", required=True, help="results JSON path")
    _add_figure_flag(p)
    p.set_defaults(func=cmd_regress)

    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        argv = _apply_config_defaults(parser, argv)
    except UsageError as e:
        print(f"toklab: {e}", file=sys.stderr)
        return EXIT_USAGE
    try:
        args = parser.parse_args(argv)
    except SystemExit as e:
        # argparse exits 0 for --help/--version, 2 for usage problems
        return EXIT_OK if e.code == 0 else EXIT_USAGE
    if args.command is None:
        parser.print_usage(sys.stderr)
        return EXIT_USAGE
    level = logging.DEBUG if args.verbose else (logging.WARNING if args.quiet else logging.INFO)
    logging.basicConfig(level=level, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s", force=True)
    try:
        _coerce_config_types(args)
        return args.func(args)
    except UsageError as e:
        log.error("%s", e)
        return EXIT_USAGE
    except (DataError, OSError) as e:
        log.error("%s", e)
        return EXIT_DATA
    except InternalError as e:
        log.error("internal invariant violation: %s", e)
        return EXIT_INTERNAL
    except ToklabError as e:
        log.error("%s", e)
        return EXIT_DATA


def script_entry() -> None:
    sys.exit(main())
