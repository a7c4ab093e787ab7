"""Command-line operator surface.

Subcommands: generate, stats, train, evaluate, select-ensemble,
export-errors, union-accuracy.  Every subcommand is deterministic given
--seed.  Exit codes: 0 success, 1 validation / input error, 2 runtime
abort (diverged training).

Reports print as aligned key/value text; --tsv writes the same rows
tab-separated for machine consumption.  Predictions files carry one line
per example: ordinal id, predicted token, correct flag (1/0),
tab-separated.
"""

from __future__ import annotations

import argparse
import random
import sys
from dataclasses import fields, replace
from pathlib import Path

import numpy as np

from . import ClozereaderError
from .asreader import Model, ModelConfig, Prediction
from .cbtio import read_examples, write_examples
from .clozegen import (
    ClozeExample,
    GenerationReport,
    SplitSpec,
    compute_stats,
    dedup_editions,
    generate_from_book,
    split_books,
)
from .corpus import ingest_books, tokenize_book
from .ensemble import (
    EnsembleMember,
    average_predictions,
    greedy_select,
    prediction_accuracy,
    read_ensemble_spec,
    write_ensemble_spec,
)
from .seeding import derive_seed
from .tagger import WordType, default_config, tag_book
from .training import (
    TrainConfig,
    TrainingDivergedError,
    evaluate as evaluate_model,
    load_checkpoint,
    train as run_training,
)
from .vocab import build_vocab, encode_dataset

_WORD_TYPES = {"ne": WordType.NAMED_ENTITY, "cn": WordType.COMMON_NOUN}


class CliError(ClozereaderError):
    """Invalid arguments or inputs; maps to exit code 1."""


# ------------------------------------------------------------------ report


def print_report(rows: list[tuple[str, object]], tsv_path: str | None = None) -> None:
    width = max((len(key) for key, _ in rows), default=0) + 2
    for key, value in rows:
        print(f"{key:<{width}}{value}")
    if tsv_path:
        with open(tsv_path, "w", encoding="utf-8", newline="\n") as fh:
            for key, value in rows:
                fh.write(f"{key}\t{value}\n")


def _format_float(value: float) -> str:
    return f"{value:.6f}"


# ---------------------------------------------------------------- generate


def _read_blocklist(path: str | None) -> list[str]:
    if path is None:
        return []
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    return [line.strip() for line in lines if line.strip() and not line.startswith("#")]


def _parse_splits(text: str) -> tuple[float, float, float]:
    parts = text.split(",")
    if len(parts) != 3:
        raise CliError(f"--splits needs three comma-separated fractions, got {text!r}")
    try:
        train, valid, test = (float(p) for p in parts)
    except ValueError as exc:
        raise CliError(f"bad --splits value: {exc}") from exc
    return train, valid, test


def cmd_generate(args) -> int:
    raw_books, errors = ingest_books(args.books)
    for error in errors:
        print(f"warning: skipped {error.path}: {error.reason}", file=sys.stderr)
    books = [tokenize_book(raw) for raw in raw_books]
    blocklist = _read_blocklist(args.blocklist)
    books, removed = dedup_editions(books, blocklist)
    for book_id, title in removed:
        print(f"warning: dropped duplicate edition {book_id} ({title})",
              file=sys.stderr)
    if not books:
        raise CliError("no books left after deduplication")
    train_frac, valid_frac, test_frac = _parse_splits(args.splits)
    spec = SplitSpec(train=train_frac, valid=valid_frac, test=test_frac,
                     rng_seed=args.seed)
    splits = split_books(books, spec)
    target_type = _WORD_TYPES[args.type]
    tagger_config = default_config()
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)

    rows: list[tuple[str, object]] = [("word_type", args.type)]
    for split_name, split_books_list in splits.items():
        examples: list[ClozeExample] = []
        report = GenerationReport()
        for book in split_books_list:
            labels = tag_book(book, tagger_config)
            book_examples, book_report = generate_from_book(
                book, labels, target_type,
                window=args.window, rng_seed=args.seed, stride=args.stride,
            )
            examples.extend(book_examples)
            report.merge(book_report)
        path = out_dir / f"{args.type}_{split_name}.txt"
        write_examples(examples, path)
        stats = compute_stats(examples)
        rows.extend([
            (f"{split_name}.books", len(split_books_list)),
            (f"{split_name}.file", str(path)),
            (f"{split_name}.examined", report.examined),
            (f"{split_name}.emitted", report.emitted),
            (f"{split_name}.skipped_no_qualifying", report.skipped_no_qualifying),
            (f"{split_name}.skipped_small_pool", report.skipped_small_pool),
            (f"{split_name}.avg_tokens", _format_float(stats.avg_tokens)),
            (f"{split_name}.vocab_size", stats.vocab_size),
        ])
    print_report(rows, args.tsv)
    return 0


# ------------------------------------------------------------------- stats


def cmd_stats(args) -> int:
    examples = read_examples(args.data)
    stats = compute_stats(examples)
    print_report(
        [
            ("dataset", Path(args.data).name),
            ("n_queries", stats.n_queries),
            ("max_options", stats.max_options),
            ("avg_options", _format_float(stats.avg_options)),
            ("avg_tokens", _format_float(stats.avg_tokens)),
            ("vocab_size", stats.vocab_size),
        ],
        args.tsv,
    )
    return 0


# ------------------------------------------------------------------- train


_MODEL_KEYS = {f.name for f in fields(ModelConfig)}
_TRAIN_KEYS = {f.name for f in fields(TrainConfig)} - {"rng_seed"}
_VOCAB_KEYS = {"vocab_cap", "anon_count"}


def _coerce(key: str, raw: str):
    if key == "query_init":
        lowered = raw.strip().lower()
        if lowered in ("1", "true", "yes"):
            return True
        if lowered in ("0", "false", "no"):
            return False
        raise CliError(f"config key {key}: expected a boolean, got {raw!r}")
    if key in ("learning_rate", "beta1", "beta2", "eps", "clip_threshold"):
        return float(raw)
    return int(raw)


def parse_config_file(path: str | None) -> dict:
    """Line-oriented key=value settings; # starts a comment."""
    if path is None:
        return {}
    settings: dict = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, raw = line.partition("=")
        key = key.strip()
        if not sep or not key:
            raise CliError(f"{path}:{lineno}: expected key=value, got {line!r}")
        if key not in _MODEL_KEYS | _TRAIN_KEYS | _VOCAB_KEYS:
            raise CliError(f"{path}:{lineno}: unknown config key {key!r}")
        try:
            settings[key] = _coerce(key, raw.strip())
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}") from exc
    return settings


def cmd_train(args) -> int:
    settings = parse_config_file(args.config)
    train_config = TrainConfig(
        rng_seed=args.seed,
        **{k: v for k, v in settings.items() if k in _TRAIN_KEYS},
    )
    train_raw = read_examples(args.train)
    valid_raw = read_examples(args.valid)
    if not train_raw:
        raise CliError(f"{args.train}: no training examples")
    if not valid_raw:
        raise CliError(f"{args.valid}: no validation examples")

    if args.resume:
        model, _ = load_checkpoint(args.resume)
        vocabulary = model.vocabulary
    else:
        vocabulary = build_vocab(
            train_raw,
            cap=settings.get("vocab_cap", 200000),
            anon_count=settings.get("anon_count", 1000),
        )
        model_config = ModelConfig(
            **{k: v for k, v in settings.items() if k in _MODEL_KEYS}
        )
        model = Model(vocabulary, model_config, rng_seed=args.seed)

    train_examples = encode_dataset(train_raw, vocabulary, derive_seed(args.seed, "train"))
    valid_examples = encode_dataset(valid_raw, vocabulary, derive_seed(args.seed, "valid"))

    log_fh = open(args.log, "w", encoding="utf-8", newline="\n") if args.log else None
    try:
        result = run_training(
            model, train_examples, valid_examples, train_config,
            checkpoint_path=args.out, log_fh=log_fh,
        )
    finally:
        if log_fh is not None:
            log_fh.close()
    for line in result.log_lines:
        print(line)
    print_report(
        [
            ("best_validation_accuracy", _format_float(result.best_accuracy)),
            ("best_step", result.best_step),
            ("steps", result.steps),
            ("epochs", result.epochs),
            ("checkpoint", result.checkpoint_path or ""),
        ],
        args.tsv,
    )
    return 0


# ---------------------------------------------------------------- evaluate


def _answer_positions(examples: list[ClozeExample]) -> list[int]:
    return [ex.candidates.index(ex.answer) for ex in examples]


def _positional(predictions: list[Prediction]) -> list[Prediction]:
    """Re-key candidate ids to list positions so predictions from models
    with different vocabularies line up."""
    return [
        replace(
            p,
            candidate_ids=np.arange(len(p.candidate_ids), dtype=np.int64),
        )
        for p in predictions
    ]


def _predict_with_checkpoint(
    path: str, raw: list[ClozeExample], seed: int
) -> list[Prediction]:
    model, _ = load_checkpoint(path)
    encoded = encode_dataset(raw, model.vocabulary, derive_seed(seed, "eval"))
    result = evaluate_model(model, encoded)
    return _positional(result.predictions)


def _frequency_baseline(examples: list[ClozeExample]) -> float:
    hits = 0
    for ex in examples:
        counts: dict[str, int] = {}
        for sentence in ex.context:
            for token in sentence:
                counts[token] = counts.get(token, 0) + 1
        pick = max(ex.candidates, key=lambda c: counts.get(c, 0))
        hits += pick == ex.answer
    return hits / len(examples)


def _load_predictions_models(args, raw: list[ClozeExample]) -> list[Prediction]:
    if args.model:
        return _predict_with_checkpoint(args.model, raw, args.seed)
    member_paths, _ = read_ensemble_spec(args.ensemble)
    member_predictions = [
        _predict_with_checkpoint(path, raw, args.seed) for path in member_paths
    ]
    return average_predictions(member_predictions)


def cmd_evaluate(args) -> int:
    raw = read_examples(args.data, word_type=_WORD_TYPES.get(args.type or ""))
    if not raw:
        raise CliError(f"{args.data}: no examples")
    predictions = _load_predictions_models(args, raw)
    answers = _answer_positions(raw)
    flags = [
        int(p.predicted_index == a) for p, a in zip(predictions, answers)
    ]
    accuracy = sum(flags) / len(flags)

    rows: list[tuple[str, object]] = [
        ("dataset", Path(args.data).name),
        ("n_examples", len(raw)),
        ("accuracy", _format_float(accuracy)),
    ]
    by_type: dict[str, list[int]] = {}
    for ex, flag in zip(raw, flags):
        if ex.word_type is not None:
            by_type.setdefault(ex.word_type.value, []).append(flag)
    for type_name in sorted(by_type):
        type_flags = by_type[type_name]
        rows.append(
            (f"accuracy[{type_name.lower()}]",
             _format_float(sum(type_flags) / len(type_flags)))
        )
    rows.append(
        ("baseline_random",
         _format_float(sum(1 / len(ex.candidates) for ex in raw) / len(raw)))
    )
    rows.append(("baseline_frequency", _format_float(_frequency_baseline(raw))))
    print_report(rows, args.tsv)

    if args.predictions_out:
        with open(args.predictions_out, "w", encoding="utf-8", newline="\n") as fh:
            for i, (ex, p, flag) in enumerate(zip(raw, predictions, flags), start=1):
                token = ex.candidates[p.predicted_index]
                fh.write(f"{i}\t{token}\t{flag}\n")
    return 0


# ---------------------------------------------------------- select-ensemble


def cmd_select_ensemble(args) -> int:
    raw = read_examples(args.valid)
    if not raw:
        raise CliError(f"{args.valid}: no examples")
    answers = _answer_positions(raw)
    members = []
    for path in args.models:
        predictions = _predict_with_checkpoint(path, raw, args.seed)
        accuracy = sum(
            p.predicted_index == a for p, a in zip(predictions, answers)
        ) / len(raw)
        members.append(EnsembleMember(path, accuracy, predictions))
    # prediction_accuracy compares ids; positional ids make answer ids the
    # candidate positions.
    selected, ensemble_accuracy = greedy_select(members, answers)
    write_ensemble_spec(args.out, [m.name for m in selected], ensemble_accuracy)
    rows: list[tuple[str, object]] = [
        ("offered", len(members)),
        ("selected", len(selected)),
        ("ensemble_accuracy", _format_float(ensemble_accuracy)),
        ("spec", args.out),
    ]
    for i, member in enumerate(selected):
        rows.append((f"member{i}", f"{member.name}"
                     f" ({_format_float(member.validation_accuracy)})"))
    print_report(rows, args.tsv)
    return 0


# ------------------------------------------------------------ predictions IO


def read_predictions_file(path: str) -> dict[int, tuple[str, int]]:
    """id -> (predicted token, correct flag)."""
    out: dict[int, tuple[str, int]] = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        if not line.strip():
            continue
        parts = line.split("\t")
        if len(parts) != 3:
            raise CliError(f"{path}:{lineno}: expected 3 tab-separated fields")
        try:
            example_id = int(parts[0])
            flag = int(parts[2])
        except ValueError as exc:
            raise CliError(f"{path}:{lineno}: {exc}") from exc
        if flag not in (0, 1):
            raise CliError(f"{path}:{lineno}: correct flag must be 0 or 1")
        if example_id in out:
            raise CliError(f"{path}:{lineno}: duplicate example id {example_id}")
        out[example_id] = (parts[1], flag)
    return out


# ------------------------------------------------------------- export-errors


def cmd_export_errors(args) -> int:
    predictions = read_predictions_file(args.predictions)
    raw = read_examples(args.data)
    if len(predictions) != len(raw) or set(predictions) != set(range(1, len(raw) + 1)):
        raise CliError("predictions file does not align with the dataset")
    wrong_ids = sorted(i for i, (_, flag) in predictions.items() if flag == 0)
    n = args.n
    if len(wrong_ids) < n:
        print(
            f"warning: only {len(wrong_ids)} incorrect examples available, "
            f"exporting all of them",
            file=sys.stderr,
        )
        chosen = wrong_ids
    else:
        chosen = sorted(random.Random(args.seed).sample(wrong_ids, n))
    study_path = Path(args.out)
    key_path = study_path.with_suffix(study_path.suffix + ".key")
    # The study file blanks the answer field; the key file restores it.
    withheld = [replace(raw[i - 1], answer="") for i in chosen]
    write_examples(withheld, study_path)
    with open(key_path, "w", encoding="utf-8", newline="\n") as fh:
        for i in chosen:
            fh.write(f"{i}\t{raw[i - 1].answer}\n")
    print_report(
        [
            ("exported", len(chosen)),
            ("study_file", str(study_path)),
            ("answer_key", str(key_path)),
        ],
        args.tsv,
    )
    return 0


# ------------------------------------------------------------ union-accuracy


def cmd_union_accuracy(args) -> int:
    a = read_predictions_file(args.predictions_a)
    b = read_predictions_file(args.predictions_b)
    if set(a) != set(b):
        raise CliError("prediction files cover different example ids")
    if args.data:
        n = len(read_examples(args.data))
        if set(a) != set(range(1, n + 1)):
            raise CliError("prediction files do not align with the dataset")
    hits = sum(1 for i in a if a[i][1] == 1 or b[i][1] == 1)
    print_report([("union_accuracy", _format_float(hits / len(a)))], args.tsv)
    return 0


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="clozereader",
        description="Cloze dataset generation and pointer-reader training.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="build cloze datasets from books")
    p.add_argument("--books", required=True, help="directory of .txt books")
    p.add_argument("--type", required=True, choices=("ne", "cn"))
    p.add_argument("--window", type=int, default=20)
    p.add_argument("--stride", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--splits", default="0.8,0.1,0.1")
    p.add_argument("--blocklist", default=None)
    p.add_argument("--out", required=True)
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("stats", help="summarize a dataset file")
    p.add_argument("--data", required=True)
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("train", help="train a reader")
    p.add_argument("--train", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--config", default=None, help="key=value lines")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--resume", default=None, help="checkpoint to continue from")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--log", default=None, help="write training log here too")
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("evaluate", help="score a model or ensemble")
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--model", default=None, help="checkpoint path")
    group.add_argument("--ensemble", default=None, help="ensemble spec path")
    p.add_argument("--data", required=True)
    p.add_argument("--type", choices=("ne", "cn"), default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--predictions-out", default=None)
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("select-ensemble", help="greedy ensemble selection")
    p.add_argument("--models", nargs="+", required=True)
    p.add_argument("--valid", required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="ensemble spec path")
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_select_ensemble)

    p = sub.add_parser("export-errors", help="sample wrong answers for review")
    p.add_argument("--predictions", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--n", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="study file path")
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_export_errors)

    p = sub.add_parser("union-accuracy", help="either-source-correct rate")
    p.add_argument("--predictions-a", required=True)
    p.add_argument("--predictions-b", required=True)
    p.add_argument("--data", default=None)
    p.add_argument("--tsv", default=None)
    p.set_defaults(func=cmd_union_accuracy)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TrainingDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (ClozereaderError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
