"""Command-line front end.

Subcommands: train, eval, baseline, cv, predict. Options can also be given in
a config file of `key = value` lines (see --config); explicit flags win over
file values, file values win over defaults.

Exit codes: 0 success, 1 runtime failure (bad files, mismatched shapes,
diverged training), 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys

from .data import (EmbeddingStore, dev_split, load_contextual, load_dataset,
                   load_word_vectors)
from .errors import (AlignmentError, ConfigError, DimensionError, DomainError,
                     ParseError, TrainingError)
from .harness import (TrainConfig, evaluate, macro_f1_by_genre, pos_breakdown,
                      run_cv, store_for, train, write_history_csv)
from .models import (ModelConfig, baseline_fit, build_model, load_checkpoint,
                     save_checkpoint)
from .seeding import rng_for

EMBED_DEFAULTS = {
    "embeddings": None,
    "contextual": None,
    "no_contextual": False,
    "permissive_vectors": False,
}
MODEL_DEFAULTS = {
    "word_dim": 300,
    "contextual_dim": 1024,
    "index_dim": 50,
    "hidden_dim": 300,
    "ff_hidden_dim": 100,
    "dropout_input": 0.3,
    "dropout_ff": 0.3,
}
TRAIN_DEFAULTS = {
    "task": None,
    "optimizer": None,
    "learning_rate": None,
    "max_epochs": 30,
    "patience": 5,
    "seed": 0,
    "dev_fraction": 0.1,
    **MODEL_DEFAULTS,
    **EMBED_DEFAULTS,
}
CV_DEFAULTS = {**TRAIN_DEFAULTS, "k": 10, "jobs": 1}
EVAL_DEFAULTS = {**EMBED_DEFAULTS, "min_pos_rate": 0.0}
BASELINE_DEFAULTS = {"task": None, "min_pos_rate": 0.0}
PREDICT_DEFAULTS = {**EMBED_DEFAULTS}

OPTION_TYPES = {
    "task": str, "optimizer": str, "learning_rate": float, "max_epochs": int,
    "patience": int, "seed": int, "dev_fraction": float, "word_dim": int,
    "contextual_dim": int, "index_dim": int, "hidden_dim": int,
    "ff_hidden_dim": int, "dropout_input": float, "dropout_ff": float,
    "embeddings": str, "contextual": str, "no_contextual": bool,
    "permissive_vectors": bool, "k": int, "jobs": int, "min_pos_rate": float,
}


def read_config_file(path: str) -> dict[str, str]:
    values: dict[str, str] = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ParseError(f"{path}:{lineno}: expected 'key = value'")
            key, _, raw = stripped.partition("=")
            values[key.strip().replace("-", "_")] = raw.strip()
    return values


def _coerce(raw: str, target, key: str):
    if target is bool:
        low = raw.lower()
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ConfigError(f"config key {key}: expected a boolean, got {raw!r}")
    try:
        return target(raw)
    except ValueError:
        raise ConfigError(f"config key {key}: expected {target.__name__}, got {raw!r}") from None


def merge_options(args: argparse.Namespace, defaults: dict) -> dict:
    """defaults <- config file <- explicit flags."""
    out = dict(defaults)
    config_path = getattr(args, "config", None)
    if config_path:
        for key, raw in read_config_file(config_path).items():
            if key not in defaults:
                raise ConfigError(f"{config_path}: unknown config key {key!r}")
            out[key] = _coerce(raw, OPTION_TYPES[key], key)
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            out[key] = value
    return out


def build_store(opts: dict) -> EmbeddingStore:
    word_vectors = {}
    if opts.get("embeddings"):
        word_vectors = load_word_vectors(opts["embeddings"], dim=opts.get("word_dim", 300),
                                         permissive=opts.get("permissive_vectors", False))
    contextual = {}
    if opts.get("contextual"):
        contextual = load_contextual(opts["contextual"], dim=opts.get("contextual_dim", 1024))
    return EmbeddingStore(word_vectors=word_vectors, contextual=contextual,
                          contextual_enabled=not opts.get("no_contextual", False),
                          word_dim=opts.get("word_dim", 300),
                          contextual_dim=opts.get("contextual_dim", 1024))


def make_train_config(opts: dict) -> TrainConfig:
    model = ModelConfig(
        word_dim=opts["word_dim"], contextual_dim=opts["contextual_dim"],
        index_dim=opts["index_dim"], hidden_dim=opts["hidden_dim"],
        ff_hidden_dim=opts["ff_hidden_dim"], dropout_input=opts["dropout_input"],
        dropout_ff=opts["dropout_ff"])
    return TrainConfig(
        task=opts["task"], optimizer=opts["optimizer"],
        learning_rate=opts["learning_rate"], max_epochs=opts["max_epochs"],
        patience=opts["patience"], seed=opts["seed"],
        dev_fraction=opts["dev_fraction"],
        contextual_enabled=not opts["no_contextual"], model=model)


def write_json(payload: dict, path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, indent=2)
        fh.write("\n")


def print_report(report, min_pos_rate: float = 0.0) -> None:
    m = report.metrics()
    print(f"precision {m['precision']:.4f}  recall {m['recall']:.4f}  "
          f"f1 {m['f1']:.4f}  accuracy {m['accuracy']:.4f}  (n={report.total})")
    for genre in sorted(report.by_genre):
        sub = report.by_genre[genre]
        print(f"  genre {genre:<14} P {sub.precision:.4f}  R {sub.recall:.4f}  "
              f"F1 {sub.f1:.4f}  Acc {sub.accuracy:.4f}  (n={sub.total})")
    try:
        print(f"  macro F1 over genres: {macro_f1_by_genre(report):.4f}")
    except DomainError:
        pass
    rows = pos_breakdown(report, min_pos_rate)
    for row in rows:
        print(f"  pos {row['pos']:<8} n={row['count']:<6} "
              f"rate {row['metaphor_rate']:.3f}  P {row['precision']:.4f}  "
              f"R {row['recall']:.4f}  F1 {row['f1']:.4f}")


def report_payload(command: str, opts: dict, report, extra: dict | None = None) -> dict:
    payload = {
        "command": command,
        "options": {k: opts[k] for k in sorted(opts)},
        "report": report.to_dict(),
    }
    try:
        payload["macro_f1_by_genre"] = macro_f1_by_genre(report)
    except DomainError:
        payload["macro_f1_by_genre"] = None
    if extra:
        payload.update(extra)
    return payload


# ---------------------------------------------------------------------------
# subcommands


def cmd_train(args: argparse.Namespace) -> int:
    opts = merge_options(args, TRAIN_DEFAULTS)
    if opts["task"] not in ("seq", "cls"):
        print("error: --task must be 'seq' or 'cls'", file=sys.stderr)
        return 2
    config = make_train_config(opts)
    train_set = load_dataset(args.data)
    if args.dev:
        dev_set = load_dataset(args.dev)
    else:
        train_set, dev_set = dev_split(train_set, config.dev_fraction, seed=config.seed)
    store = store_for(build_store(opts), config)
    model = build_model(config.task, store, config.model, rng_for(config.seed, "init"))
    result = train(model, train_set, dev_set, config)

    save_checkpoint(model, args.out)
    history_path = args.history or args.out + ".history.csv"
    write_history_csv(result.history, history_path)
    report = evaluate(model, dev_set, config.task)
    opts_echo = {**opts, "data": args.data, "dev": args.dev or ""}
    payload = report_payload("train", opts_echo, report, extra={
        "best_epoch": result.best_epoch,
        "epochs_run": len(result.history),
        "config": config.to_dict(),
    })
    report_path = args.report or args.out + ".report.json"
    write_json(payload, report_path)

    print(f"trained {config.task} model on {len(train_set)} examples "
          f"({len(result.history)} epochs, best epoch {result.best_epoch})")
    print("dev results:")
    print_report(report)
    print(f"checkpoint: {args.out}")
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    opts = merge_options(args, EVAL_DEFAULTS)
    with open(args.ckpt, encoding="utf-8") as fh:
        header = json.load(fh)
    if "config" not in header or "kind" not in header:
        raise ConfigError(f"{args.ckpt}: not a model checkpoint")
    dims = header["config"]
    store = build_store({**opts, "word_dim": dims["word_dim"],
                         "contextual_dim": dims["contextual_dim"]})
    model = load_checkpoint(args.ckpt, store)
    task = args.task or model.task
    if task == "seq" and model.task == "cls":
        raise ConfigError("a target classifier cannot produce per-token labels; "
                          "evaluate it with --task cls")
    data = load_dataset(args.data)
    if not data:
        raise DomainError(f"{args.data}: no examples to evaluate")
    report = evaluate(model, data, task)
    print_report(report, opts["min_pos_rate"])
    if args.out:
        opts_echo = {**opts, "ckpt": args.ckpt, "data": args.data, "task": task}
        write_json(report_payload("eval", opts_echo, report), args.out)
    return 0


def cmd_baseline(args: argparse.Namespace) -> int:
    opts = merge_options(args, BASELINE_DEFAULTS)
    if opts["task"] not in ("seq", "cls"):
        print("error: --task must be 'seq' or 'cls'", file=sys.stderr)
        return 2
    train_set = load_dataset(args.train)
    test_set = load_dataset(args.test)
    if not test_set:
        raise DomainError(f"{args.test}: no examples to evaluate")
    model = baseline_fit(train_set, opts["task"])
    report = evaluate(model, test_set, opts["task"])
    print(f"lexical baseline ({opts['task']}, {len(model.counts)} word types)")
    print_report(report, opts["min_pos_rate"])
    if args.out:
        opts_echo = {**opts, "train": args.train, "test": args.test}
        write_json(report_payload("baseline", opts_echo, report), args.out)
    return 0


def cmd_cv(args: argparse.Namespace) -> int:
    opts = merge_options(args, CV_DEFAULTS)
    if opts["task"] not in ("seq", "cls"):
        print("error: --task must be 'seq' or 'cls'", file=sys.stderr)
        return 2
    if opts["k"] < 2:
        print(f"error: --k must be at least 2, got {opts['k']}", file=sys.stderr)
        return 2
    if opts["jobs"] < 1:
        print(f"error: --jobs must be at least 1, got {opts['jobs']}", file=sys.stderr)
        return 2
    config = make_train_config(opts)
    dataset = load_dataset(args.data)
    store = build_store(opts)
    result = run_cv(dataset, store, config, k=opts["k"], jobs=opts["jobs"])
    summary = result.summary()
    print(f"{opts['k']}-fold cross-validation, {len(dataset)} examples, pooled:")
    print_report(result.pooled)
    f1 = summary["f1"]
    print(f"  per-fold F1 {f1['mean']:.4f} +/- {f1['std']:.4f}")
    if args.out:
        payload = {
            "command": "cv",
            "options": {**{k: opts[k] for k in sorted(opts)}, "data": args.data},
            "config": config.to_dict(),
            **result.to_dict(),
        }
        write_json(payload, args.out)
    return 0


def cmd_predict(args: argparse.Namespace) -> int:
    opts = merge_options(args, PREDICT_DEFAULTS)
    with open(args.ckpt, encoding="utf-8") as fh:
        header = json.load(fh)
    if "config" not in header or "kind" not in header:
        raise ConfigError(f"{args.ckpt}: not a model checkpoint")
    dims = header["config"]
    store = build_store({**opts, "word_dim": dims["word_dim"],
                         "contextual_dim": dims["contextual_dim"]})
    model = load_checkpoint(args.ckpt, store)
    data = load_dataset(args.data, allow_unlabeled=True)
    with open(args.out, "w", encoding="utf-8") as fh:
        for ex in data:
            rec = {"id": ex.id, "genre": ex.genre or "", "tokens": ex.tokens,
                   "pos": ex.pos or []}
            if ex.target_index is not None:
                rec["verb_index"] = ex.target_index
            if ex.labels is not None:
                rec["labels"] = ex.labels
            if model.task == "seq":
                rec["pred_labels"] = model.predict_labels(ex)
            else:
                rec["pred"] = model.predict_target(ex)
            fh.write(json.dumps(rec, sort_keys=True) + "\n")
    print(f"wrote {len(data)} predictions to {args.out}")
    return 0


# ---------------------------------------------------------------------------
# parser


def _add_embedding_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--embeddings", help="word-vector text file")
    p.add_argument("--contextual", help="contextual-vector jsonl file")
    p.add_argument("--no-contextual", action="store_true", default=None,
                   dest="no_contextual",
                   help="feed zeros in place of contextual vectors")
    p.add_argument("--permissive-vectors", action="store_true", default=None,
                   dest="permissive_vectors",
                   help="skip malformed word-vector lines instead of failing")


def _add_hyper_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--task", choices=["seq", "cls"])
    p.add_argument("--optimizer", choices=["sgd", "adam"])
    p.add_argument("--lr", "--learning-rate", dest="learning_rate", type=float)
    p.add_argument("--max-epochs", dest="max_epochs", type=int)
    p.add_argument("--patience", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--dev-fraction", dest="dev_fraction", type=float)
    p.add_argument("--word-dim", dest="word_dim", type=int)
    p.add_argument("--contextual-dim", dest="contextual_dim", type=int)
    p.add_argument("--index-dim", dest="index_dim", type=int)
    p.add_argument("--hidden-dim", dest="hidden_dim", type=int)
    p.add_argument("--ff-hidden-dim", dest="ff_hidden_dim", type=int)
    p.add_argument("--dropout-input", dest="dropout_input", type=float)
    p.add_argument("--dropout-ff", dest="dropout_ff", type=float)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="metaphor",
        description="Train and evaluate metaphor detectors.")
    sub = parser.add_subparsers(dest="command")

    p = sub.add_parser("train", help="train a model, write checkpoint + history + report")
    p.add_argument("--data", required=True, help="training data (.csv or .jsonl)")
    p.add_argument("--dev", help="dev data; default carves a slice off --data")
    p.add_argument("--out", required=True, help="checkpoint path")
    p.add_argument("--report", help="report json path (default: <out>.report.json)")
    p.add_argument("--history", help="history csv path (default: <out>.history.csv)")
    p.add_argument("--config", help="config file of 'key = value' lines")
    _add_hyper_flags(p)
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on labeled data")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="labeled data")
    p.add_argument("--task", choices=["seq", "cls"],
                   help="evaluation task (default: the checkpoint's task; a seq "
                        "model can also be scored as cls at the target index)")
    p.add_argument("--out", help="write a json report here")
    p.add_argument("--min-pos-rate", dest="min_pos_rate", type=float,
                   help="hide POS rows with gold metaphor rate below this")
    p.add_argument("--config", help="config file of 'key = value' lines")
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("baseline", help="fit and score the lexical baseline")
    p.add_argument("--task", choices=["seq", "cls"])
    p.add_argument("--train", required=True, help="training data")
    p.add_argument("--test", required=True, help="test data")
    p.add_argument("--out", help="write a json report here")
    p.add_argument("--min-pos-rate", dest="min_pos_rate", type=float)
    p.add_argument("--config", help="config file of 'key = value' lines")
    p.set_defaults(func=cmd_baseline)

    p = sub.add_parser("cv", help="stratified k-fold cross-validation")
    p.add_argument("--data", required=True, help="dataset to fold")
    p.add_argument("--k", type=int, help="number of folds (default 10)")
    p.add_argument("--jobs", type=int, help="worker threads (default 1)")
    p.add_argument("--out", help="write a json report here")
    p.add_argument("--config", help="config file of 'key = value' lines")
    _add_hyper_flags(p)
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_cv)

    p = sub.add_parser("predict", help="label new data with a checkpoint")
    p.add_argument("--ckpt", required=True, help="checkpoint path")
    p.add_argument("--data", required=True, help="data to label (labels optional)")
    p.add_argument("--out", required=True, help="predictions jsonl path")
    p.add_argument("--config", help="config file of 'key = value' lines")
    _add_embedding_flags(p)
    p.set_defaults(func=cmd_predict)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    if getattr(args, "command", None) is None:
        parser.print_help()
        return 2
    try:
        return args.func(args)
    except (ParseError, ConfigError, DomainError, TrainingError, AlignmentError,
            DimensionError, OSError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
