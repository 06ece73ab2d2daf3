"""Command line entry points.

Subcommands:

* ``build``         build char trie, suffix trie and tf-idf indices from a corpus
* ``train-ngram``   learn a subword vocabulary and train the n-gram model
* ``eval``          score models on a test corpus and write reports
* ``bench``         measure suggestion latency or kernel throughput
* ``serve``         run the HTTP suggestion service
* ``suggest``       one-shot suggestion for a prefix, printed as JSON

Exit codes: 0 success, 1 runtime failure, 2 usage error.  Logs go to
stderr; data goes to stdout or to files named by ``--output-dir``.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import multiprocessing
import os
import sys
import time
from pathlib import Path
from typing import Any, Callable, Sequence

import numpy as np

from ghostline import __version__
from ghostline.corpus import corpus_fingerprint, load_split, mark_seen
from ghostline.engine import GhostEngine
from ghostline.evaluation import (
    UtterancePrediction,
    bench_latency,
    collect_predictions,
    score_predictions,
    sweep_thresholds,
    sweep_truncation,
)
from ghostline.ngram import (
    DEFAULT_DISCOUNT,
    DEFAULT_ORDER,
    DEFAULT_PRUNE,
    StopPolicy,
    train_ngram,
)
from ghostline.rerank import RerankConfig, fit_tfidf
from ghostline.trie import (
    DEFAULT_MAX_LEN,
    DEFAULT_MIN_FREQ,
    build_char_trie,
    build_suffix_trie,
)
from ghostline.vocab import learn_vocabulary

log = logging.getLogger("ghostline")

INDEX_FILES = {
    "char_trie": "char_trie.ghst",
    "suffix_trie": "suffix_trie.ghst",
    "tfidf": "tfidf.ghst",
    "ngram": "ngram.ghst",
}


def _positive_int(text: str) -> int:
    value = int(text)
    if value <= 0:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {text!r}")
    return value


def _parse_config_value(raw: str) -> Any:
    text = raw.strip()
    if len(text) >= 2 and text[0] == text[-1] and text[0] in "'\"":
        return text[1:-1]
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    for cast in (int, float):
        try:
            return cast(text)
        except ValueError:
            continue
    return text


def load_config_file(path: Path) -> dict[str, Any]:
    """Parse a ``key = value`` config file into an options dict.

    Blank lines and ``#`` comments are ignored.  Keys use the same
    spelling as the long command line flags (dashes or underscores).
    """
    options: dict[str, Any] = {}
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        key, sep, value = stripped.partition("=")
        if not sep:
            raise ValueError(f"{path}: line {lineno}: expected 'key = value'")
        options[key.strip().replace("-", "_")] = _parse_config_value(value)
    return options


def apply_config(args: argparse.Namespace, parser: argparse.ArgumentParser, argv: Sequence[str]) -> None:
    """Merge ``--config`` options under explicitly given flags.

    A key from the file is applied only when the matching flag is absent
    from ``argv``, so the command line always wins.
    """
    if not getattr(args, "config", None):
        return
    path = Path(args.config)
    try:
        options = load_config_file(path)
    except (OSError, ValueError) as exc:
        parser.error(str(exc))
    given = set(argv)
    aliases = {"entropy_threshold": ("--entropy-threshold", "--entropy")}
    for key, value in options.items():
        if not hasattr(args, key):
            parser.error(f"{path}: unknown option {key!r}")
        spellings = aliases.get(key, ("--" + key.replace("_", "-"),))
        if any(flag in given for flag in spellings):
            continue
        setattr(args, key, value)


def _parse_prune(text: str, order: int) -> tuple[int, ...]:
    if isinstance(text, tuple):
        return text
    parts = [p for p in str(text).replace(",", " ").split() if p]
    thresholds = tuple(int(p) for p in parts)
    if len(thresholds) == 1:
        thresholds = thresholds * order
    if len(thresholds) != order:
        raise ValueError(f"--prune needs 1 or {order} thresholds, got {len(thresholds)}")
    return thresholds


def _index_paths(args: argparse.Namespace) -> list[Path]:
    paths = [Path(p) for p in args.index or []]
    if args.indices:
        root = Path(args.indices)
        for name in INDEX_FILES.values():
            candidate = root / name
            if candidate.exists():
                paths.append(candidate)
    if not paths:
        raise ValueError("no index files given; use --indices DIR or --index FILE")
    return paths


def _stop_policy(args: argparse.Namespace) -> StopPolicy:
    if getattr(args, "entropy_threshold", None) is not None:
        return StopPolicy(kind="entropy", threshold=args.entropy_threshold)
    if getattr(args, "max_words", None) is not None:
        return StopPolicy(kind="max_words", t=args.max_words)
    return StopPolicy(kind="none")


def _rerank_config(args: argparse.Namespace) -> RerankConfig:
    return RerankConfig(alpha=args.alpha, beta=args.beta, gamma=args.gamma)


def _add_indices_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--indices", help="directory holding index files from build/train-ngram")
    sub.add_argument("--index", action="append", help="explicit index file, repeatable")


def _add_stop_flags(sub: argparse.ArgumentParser) -> None:
    group = sub.add_mutually_exclusive_group()
    group.add_argument(
        "--entropy-threshold", "--entropy", dest="entropy_threshold", type=float,
        help="stop expansion when next-token entropy exceeds this",
    )
    group.add_argument("--max-words", type=int, choices=range(1, 11), metavar="T", help="truncate suggestions to T words")
    sub.add_argument("--beam-width", type=_positive_int, default=None, help="beam width for the n-gram search")


def _add_rerank_flags(sub: argparse.ArgumentParser) -> None:
    sub.add_argument("--rerank", action="store_true", help="rerank candidates with the tf-idf index")
    sub.add_argument("--alpha", type=float, default=RerankConfig.alpha, help="weight of the scaled model score")
    sub.add_argument("--beta", type=float, default=RerankConfig.beta, help="weight of the context cosine similarity")
    sub.add_argument("--gamma", type=float, default=RerankConfig.gamma, help="weight of the scaled length penalty")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ghostline", description=__doc__, allow_abbrev=False)
    parser.add_argument("--version", action="version", version=f"ghostline {__version__}")
    parser.add_argument("--config", help="key = value file merged under explicit flags")
    parser.add_argument("--verbose", action="store_true", help="debug logging on stderr")
    commands = parser.add_subparsers(dest="command", required=True)

    build = commands.add_parser("build", help="build trie and tf-idf indices", allow_abbrev=False)
    build.add_argument("--corpus", required=True, help="training corpus path")
    build.add_argument("--format", choices=("jsonl", "lines"), default="jsonl")
    build.add_argument("--output-dir", required=True)
    build.add_argument("--lowercase", action="store_true")
    build.add_argument("--max-len", type=_positive_int, default=DEFAULT_MAX_LEN)
    build.add_argument("--suffix-min-freq", type=_positive_int, default=DEFAULT_MIN_FREQ)
    build.set_defaults(func=cmd_build)

    train = commands.add_parser("train-ngram", help="train the subword n-gram model", allow_abbrev=False)
    train.add_argument("--corpus", required=True)
    train.add_argument("--format", choices=("jsonl", "lines"), default="jsonl")
    train.add_argument("--output-dir", required=True)
    train.add_argument("--lowercase", action="store_true")
    train.add_argument("--vocab-size", type=_positive_int, default=4096)
    train.add_argument("--order", type=_positive_int, default=DEFAULT_ORDER)
    train.add_argument("--prune", default=None, help="count threshold per order, comma separated or a single value")
    train.add_argument("--discount", type=float, default=DEFAULT_DISCOUNT)
    train.set_defaults(func=cmd_train_ngram)

    evaluate = commands.add_parser("eval", help="score models on a test corpus", allow_abbrev=False)
    evaluate.add_argument("--corpus", required=True, help="test corpus path")
    evaluate.add_argument("--train-corpus", help="training corpus, used to mark seen utterances")
    evaluate.add_argument("--format", choices=("jsonl", "lines"), default="jsonl")
    _add_indices_flags(evaluate)
    evaluate.add_argument("--model", action="append", choices=("mpc", "mpcpp", "qb"), help="model to score, repeatable; default all available")
    _add_rerank_flags(evaluate)
    _add_stop_flags(evaluate)
    evaluate.add_argument("--lowercase", action="store_true")
    evaluate.add_argument("--output-dir", required=True)
    evaluate.add_argument("--thresholds", type=_positive_int, default=100, help="max rows in the confidence sweep")
    evaluate.add_argument("--truncate", action="store_true", help="also sweep word truncation lengths 1..10")
    evaluate.add_argument("--jobs", type=_positive_int, default=None, help="worker processes, default all cores")
    evaluate.set_defaults(func=cmd_eval)

    bench = commands.add_parser("bench", help="latency and kernel benchmarks", allow_abbrev=False)
    bench.add_argument("--corpus", help="corpus supplying benchmark prefixes")
    bench.add_argument("--format", choices=("jsonl", "lines"), default="jsonl")
    _add_indices_flags(bench)
    bench.add_argument("--model", action="append", choices=("mpc", "mpcpp", "qb"))
    _add_stop_flags(bench)
    bench.add_argument("--n", type=_positive_int, default=1000, help="number of timed calls")
    bench.add_argument("--warmup", type=int, default=20)
    bench.add_argument("--lowercase", action="store_true")
    bench.add_argument("--kernels", action="store_true", help="compare compiled and numpy kernel throughput instead")
    bench.set_defaults(func=cmd_bench)

    serve = commands.add_parser("serve", help="run the HTTP service", allow_abbrev=False)
    _add_indices_flags(serve)
    serve.add_argument("--bind", default=None, help="host:port, default GHOST_BIND or 127.0.0.1:8040")
    serve.set_defaults(func=cmd_serve)

    suggest = commands.add_parser("suggest", help="one-shot suggestion", allow_abbrev=False)
    _add_indices_flags(suggest)
    suggest.add_argument("--model", choices=("mpc", "mpcpp", "qb"), default="mpc")
    _add_rerank_flags(suggest)
    _add_stop_flags(suggest)
    suggest.add_argument("--context", action="append", help="prior dialog turn, repeatable in order")
    suggest.add_argument("--min-confidence", type=float, default=None)
    suggest.add_argument("prefix")
    suggest.set_defaults(func=cmd_suggest)

    return parser


def cmd_build(args: argparse.Namespace) -> int:
    split = load_split(Path(args.corpus), fmt=args.format, lowercase=args.lowercase)
    utterances = [text for text, _ in split.human_utterances()]
    fingerprint = corpus_fingerprint(split.dialogs)
    meta = {
        "corpus": str(args.corpus),
        "corpus_fingerprint": fingerprint,
        "lowercase": args.lowercase,
        "n_utterances": len(utterances),
    }
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    log.info("building char trie over %d utterances", len(utterances))
    char_trie = build_char_trie(utterances, max_len=args.max_len, meta=dict(meta))
    char_trie.save(out / INDEX_FILES["char_trie"])

    log.info("building suffix trie (min_freq=%d)", args.suffix_min_freq)
    suffix_trie = build_suffix_trie(
        utterances, max_len=args.max_len, min_freq=args.suffix_min_freq, meta=dict(meta)
    )
    suffix_trie.save(out / INDEX_FILES["suffix_trie"])

    log.info("fitting tf-idf")
    tfidf = fit_tfidf(utterances, meta=dict(meta))
    tfidf.save(out / INDEX_FILES["tfidf"])

    log.info("wrote indices to %s", out)
    return 0


def cmd_train_ngram(args: argparse.Namespace) -> int:
    split = load_split(Path(args.corpus), fmt=args.format, lowercase=args.lowercase)
    utterances = [text for text, _ in split.human_utterances()]
    if args.prune is None:
        prune = DEFAULT_PRUNE[: args.order] if args.order <= len(DEFAULT_PRUNE) else None
        if prune is None:
            raise ValueError(f"--prune is required for order {args.order}")
    else:
        prune = _parse_prune(args.prune, args.order)

    log.info("learning subword vocabulary (target %d)", args.vocab_size)
    vocab = learn_vocabulary(utterances, target_size=args.vocab_size)
    log.info("vocabulary has %d text pieces", vocab.size - 1)

    log.info("training order-%d model", args.order)
    model = train_ngram(
        vocab,
        utterances,
        order=args.order,
        prune_thresholds=prune,
        discount=args.discount,
        meta={
            "corpus": str(args.corpus),
            "corpus_fingerprint": corpus_fingerprint(split.dialogs),
            "lowercase": args.lowercase,
            "vocab_size": args.vocab_size,
        },
    )
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    model.save(out / INDEX_FILES["ngram"])
    log.info("wrote %s", out / INDEX_FILES["ngram"])
    return 0


def _make_suggest_fn(
    engine: GhostEngine,
    model: str,
    stop: StopPolicy,
    rerank: bool,
    rerank_cfg: RerankConfig | None = None,
    beam_width: int | None = None,
) -> Callable[[str, tuple[str, ...]], Any]:
    def suggest(prefix: str, context: tuple[str, ...]) -> Any:
        return engine.suggest(
            prefix,
            context=list(context),
            model=model,
            use_rerank=rerank,
            stop=stop,
            rerank_cfg=rerank_cfg,
            beam_width=beam_width,
        )

    return suggest


_EVAL_STATE: dict[str, Any] = {}


def _init_eval_worker(
    engine: GhostEngine,
    model: str,
    stop: StopPolicy,
    rerank: bool,
    rerank_cfg: RerankConfig | None = None,
    beam_width: int | None = None,
) -> None:
    _EVAL_STATE["fn"] = _make_suggest_fn(engine, model, stop, rerank, rerank_cfg, beam_width)


def _eval_group(samples: list) -> UtterancePrediction:
    preds = collect_predictions(_EVAL_STATE["fn"], samples)
    assert len(preds) == 1
    return preds[0]


def _collect_parallel(
    engine: GhostEngine,
    model: str,
    stop: StopPolicy,
    rerank: bool,
    samples: list,
    jobs: int,
    rerank_cfg: RerankConfig | None = None,
    beam_width: int | None = None,
) -> list[UtterancePrediction]:
    groups: list[list] = []
    for sample in samples:
        if groups and groups[-1][0].utterance_id == sample.utterance_id:
            groups[-1].append(sample)
        else:
            groups.append([sample])
    initargs = (engine, model, stop, rerank, rerank_cfg, beam_width)
    if jobs <= 1 or len(groups) < 2:
        _init_eval_worker(*initargs)
        return [_eval_group(group) for group in groups]
    ctx = multiprocessing.get_context("fork")
    chunk = max(1, len(groups) // (jobs * 4))
    with ctx.Pool(jobs, initializer=_init_eval_worker, initargs=initargs) as pool:
        return pool.map(_eval_group, groups, chunksize=chunk)


def _write_tr_curve(path: Path, rows: list[dict[str, Any]]) -> None:
    fields = ["threshold", "tr", "mr", "p_prec", "p_rec", "pred_len", "matched_len", "tes"]
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, extrasaction="ignore")
        writer.writeheader()
        for row in rows:
            writer.writerow({k: row.get(k) for k in fields})


def cmd_eval(args: argparse.Namespace) -> int:
    engine = GhostEngine.load(_index_paths(args))
    test = load_split(Path(args.corpus), fmt=args.format, lowercase=args.lowercase)
    test_fp = corpus_fingerprint(test.dialogs)
    for name, fp in engine.fingerprints().items():
        if fp == test_fp:
            raise ValueError(
                f"index {name!r} was built from this corpus; evaluating a model "
                "on its own training data is refused (pass a held-out corpus)"
            )

    samples = test.prefix_samples()
    if args.train_corpus:
        train = load_split(Path(args.train_corpus), fmt=args.format, lowercase=args.lowercase)
        mark_seen(samples, [text for text, _ in train.human_utterances()])

    models = args.model or engine.models()
    missing = [m for m in models if m not in engine.models()]
    if missing:
        raise ValueError(f"indices do not support model(s): {', '.join(missing)}")

    stop = _stop_policy(args)
    jobs = args.jobs or os.cpu_count() or 1
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)

    reports: dict[str, Any] = {}
    for model in models:
        log.info("scoring %s over %d prefixes (%d jobs)", model, len(samples), jobs)
        started = time.perf_counter()
        preds = _collect_parallel(
            engine, model, stop, args.rerank, samples, jobs,
            rerank_cfg=_rerank_config(args), beam_width=args.beam_width,
        )
        log.info("%s: predictions in %.1fs", model, time.perf_counter() - started)
        report = {
            "model": model,
            "rerank": args.rerank,
            "stop": {"kind": stop.kind, "t": stop.t, "threshold": stop.threshold},
            "splits": score_predictions(preds),
            "tr_curve": sweep_thresholds(preds, limit=args.thresholds),
        }
        if args.truncate:
            report["truncation"] = sweep_truncation(preds)
        reports[model] = report
        _write_tr_curve(out / f"tr_curve_{model}.csv", report["tr_curve"])

    document = {
        "corpus": str(args.corpus),
        "corpus_fingerprint": test_fp,
        "n_utterances": len({s.utterance_id for s in samples}),
        "n_prefixes": len(samples),
        "models": reports,
    }
    report_path = out / "report.json"
    report_path.write_text(json.dumps(document, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    print(report_path)
    return 0


def _bench_prefixes(utterances: list[str], n: int) -> list[str]:
    eligible = [u for u in utterances if len(u) >= 2]
    if not eligible:
        raise ValueError("corpus has no utterances of length >= 2")
    prefixes = []
    for i in range(n):
        text = eligible[i % len(eligible)]
        cut = 1 + (i * 7) % (len(text) - 1)
        prefixes.append(text[:cut])
    return prefixes


def _bench_kernels(repeats: int) -> int:
    from ghostline import _kernels
    from ghostline._kernels import pure

    rng = np.random.default_rng(0)
    size = 4096
    unigram = rng.random(size)
    unigram /= unigram.sum()
    levels = []
    for width in (400, 80, 12):
        ids = np.sort(rng.choice(size, size=width, replace=False).astype(np.int32))
        probs = rng.random(width)
        levels.append((ids, probs, 0.3))

    def timed(fn: Callable) -> float:
        fn(unigram, levels)
        started = time.perf_counter()
        for _ in range(repeats):
            fn(unigram, levels)
        return (time.perf_counter() - started) / repeats

    rows = {"numpy": timed(pure.fill_distribution)}
    if _kernels.BACKEND == "compiled":
        rows["compiled"] = timed(_kernels.fill_distribution)
    result = {
        "backend": _kernels.BACKEND,
        "repeats": repeats,
        "vocab_size": size,
        "mean_us": {name: seconds * 1e6 for name, seconds in rows.items()},
    }
    print(json.dumps(result, indent=2, sort_keys=True))
    return 0


def cmd_bench(args: argparse.Namespace) -> int:
    if args.kernels:
        return _bench_kernels(max(100, args.n))
    if not args.corpus:
        raise ValueError("--corpus is required unless --kernels is given")
    engine = GhostEngine.load(_index_paths(args))
    split = load_split(Path(args.corpus), fmt=args.format, lowercase=args.lowercase)
    utterances = [text for text, _ in split.human_utterances()]
    prefixes = _bench_prefixes(utterances, args.n)
    stop = _stop_policy(args)
    results = {}
    for model in args.model or engine.models():
        fn = _make_suggest_fn(engine, model, stop, rerank=False, beam_width=args.beam_width)
        stats = bench_latency(fn, prefixes, warmup=args.warmup)
        results[model] = stats.as_dict()
        log.info("%s: p50=%.2fms p95=%.2fms p99=%.2fms", model, stats.p50, stats.p95, stats.p99)
    print(json.dumps({"n": args.n, "models": results}, indent=2, sort_keys=True))
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    from ghostline.service import run_service

    bind = args.bind or os.environ.get("GHOST_BIND") or "127.0.0.1:8040"
    run_service(_index_paths(args), bind=bind)
    return 0


def cmd_suggest(args: argparse.Namespace) -> int:
    engine = GhostEngine.load(_index_paths(args))
    suggestion = engine.suggest(
        args.prefix,
        context=args.context or [],
        model=args.model,
        use_rerank=args.rerank,
        stop=_stop_policy(args),
        min_confidence=args.min_confidence,
        rerank_cfg=_rerank_config(args),
        beam_width=args.beam_width,
    )
    print(
        json.dumps(
            {
                "suggestion": suggestion.text,
                "confidence": None if suggestion.is_abstention else suggestion.score,
                "source": suggestion.source,
            },
            sort_keys=True,
        )
    )
    return 0


def main(argv: Sequence[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    apply_config(args, parser, argv)
    logging.basicConfig(
        stream=sys.stderr,
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )
    try:
        return args.func(args)
    except (ValueError, OSError) as exc:
        log.error("%s", exc)
        return 1
    except KeyboardInterrupt:
        return 1


if __name__ == "__main__":
    sys.exit(main())
