"""Command-line interface wiring the pipeline modules together.

Every subcommand maps onto one module pipeline and is deterministic given
its inputs and seed.  Exit codes: 0 success, 2 config error, 3 data error,
4 numeric error.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import sys
from importlib import metadata
from pathlib import Path

import numpy as np

from . import baseline, corpus, ensemble, features, metrics, mlp
from .errors import ConfigError, DataError, NumericError, OfflangError
from .normalize import NormalizerConfig, load_lexicon, load_table, normalize_text

SUBTASK_BY_CLASS_COUNT = {2: "A", 3: "C"}


def _version() -> str:
    try:
        return metadata.version("offlang")
    except metadata.PackageNotFoundError:
        return "0.1.0"


def _repro_line(args: argparse.Namespace) -> str:
    resolved = {k: v for k, v in sorted(vars(args).items()) if k != "func"}
    digest = hashlib.sha256(
        json.dumps(resolved, sort_keys=True, default=str).encode()
    ).hexdigest()[:12]
    seed = resolved.get("seed", "-")
    return f"# run config_hash={digest} seed={seed} version={_version()}"


def _require_inputs(*paths) -> None:
    for p in paths:
        if p is None:
            continue
        for item in ([p] if isinstance(p, (str, Path)) else p):
            if not Path(item).exists():
                raise ConfigError(f"input path does not exist: {item}")


def _read_tweets(path) -> list[tuple[int, str]]:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if lineno == 1 and line == "id\ttext":
                continue
            parts = line.split("\t", 1)
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected id<TAB>text")
            try:
                rows.append((int(parts[0]), parts[1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad id {parts[0]!r}") from None
    return rows


def _write_tweets(path, rows) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example_id, text in rows:
            fh.write(f"{example_id}\t{text}\n")


def _read_labels(path) -> dict[int, str]:
    table = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if lineno == 1 and line == "id\tlabel":
                continue
            parts = line.split("\t")
            if len(parts) != 2:
                raise DataError(f"{path}:{lineno}: expected id<TAB>label")
            try:
                table[int(parts[0])] = parts[1].strip().upper()
            except ValueError:
                raise DataError(f"{path}:{lineno}: bad id {parts[0]!r}") from None
    return table


def _write_labels(path, labels: dict[int, str]) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for example_id in sorted(labels):
            fh.write(f"{example_id}\t{labels[example_id]}\n")


def _read_examples_tsv(path) -> list[corpus.LabeledExample]:
    """3-column id<TAB>text<TAB>label file used by the baseline commands."""
    rows = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.rstrip("\n")
            if not line or line.startswith("#"):
                continue
            if lineno == 1 and line == "id\ttext\tlabel":
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"{path}:{lineno}: expected id<TAB>text<TAB>label")
            rows.append(
                corpus.LabeledExample(id=int(parts[0]), text=parts[1], label=parts[2].upper())
            )
    return rows


def _load_normalizer_config(path) -> NormalizerConfig:
    if path is None:
        return NormalizerConfig.default()
    config_path = Path(path)
    try:
        spec = json.loads(config_path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise ConfigError(f"cannot read normalizer config {path}: {exc}") from None
    base = config_path.parent

    def resolve(name):
        p = Path(spec[name])
        return p if p.is_absolute() else base / p

    defaults = NormalizerConfig.default()
    return NormalizerConfig(
        contraction_table=(
            load_table(resolve("contractions")) if "contractions" in spec
            else defaults.contraction_table
        ),
        emoji_table=(
            load_table(resolve("emoticons")) if "emoticons" in spec
            else defaults.emoji_table
        ),
        hashtag_lexicon=(
            load_lexicon(resolve("hashtag_lexicon")) if "hashtag_lexicon" in spec
            else defaults.hashtag_lexicon
        ),
        max_user_run=int(spec.get("max_user_run", 3)),
    )


def _emit_report(lines: list[str], out_path, args) -> None:
    lines = list(lines) + [_repro_line(args)]
    text = "\n".join(lines) + "\n"
    sys.stdout.write(text)
    if out_path:
        Path(out_path).write_text(text, encoding="utf-8")


def _classes_for(subtask: str | None, n_classes: int | None = None) -> tuple[str, ...]:
    if subtask is None:
        if n_classes is None or n_classes not in SUBTASK_BY_CLASS_COUNT:
            raise ConfigError("cannot infer subtask; pass --subtask A or C")
        subtask = SUBTASK_BY_CLASS_COUNT[n_classes]
    return corpus.subtask_labels(subtask)


# --- subcommands -----------------------------------------------------------


def cmd_normalize(args) -> None:
    _require_inputs(args.in_path, args.config)
    config = _load_normalizer_config(args.config)
    rows = _read_tweets(args.in_path)
    _write_tweets(args.out, ((i, normalize_text(t, config)) for i, t in rows))
    print(_repro_line(args))


def cmd_prepare(args) -> None:
    _require_inputs(args.in_path)
    examples = corpus.load_gold(args.in_path, args.subtask)
    if args.out_text:
        _write_tweets(args.out_text, ((ex.id, ex.text) for ex in examples))
    if args.out_labels:
        _write_labels(args.out_labels, {ex.id: ex.label for ex in examples})
    print(f"# prepared {len(examples)} example(s) for subtask {args.subtask}")
    print(_repro_line(args))


def cmd_threshold(args) -> None:
    _require_inputs(args.in_path)
    labels: dict[int, str] = {}
    texts = []
    for record in corpus.iter_confidence(args.in_path, conf_column=args.conf_column):
        example = corpus.threshold_record(record, args.threshold)
        labels[example.id] = example.label
        if args.out_text:
            texts.append((example.id, example.text))
    _write_labels(args.out_labels, labels)
    if args.out_text:
        _write_tweets(args.out_text, texts)
    print(f"# thresholded {len(labels)} record(s) at {args.threshold}")
    print(_repro_line(args))


def cmd_weigh(args) -> None:
    _require_inputs(args.in_path)
    with open(args.in_path, encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").split("\t")
    if "tweet" in header:
        examples = corpus.load_gold(args.in_path, args.subtask)
    else:
        examples = [
            corpus.LabeledExample(id=i, text="", label=label)
            for i, label in _read_labels(args.in_path).items()
        ]
    cw = corpus.class_weights(examples, args.subtask)
    lines = [f"n_classes={cw.n_classes}"]
    for cls in corpus.subtask_labels(args.subtask):
        lines.append(f"count_{cls}={cw.counts[cls]}")
        lines.append(f"weight_{cls}={cw.weights[cls]:.12g}")
    _emit_report(lines, None, args)


def _load_feature_matrix(paths: list[str]) -> features.AlignedFeatures:
    sets = [features.read_features(p) for p in paths]
    return features.align_concat(sets)


def cmd_train_head(args) -> None:
    feature_paths = args.features.split(",")
    _require_inputs(feature_paths, [args.labels])
    aligned = _load_feature_matrix(feature_paths)
    labels = _read_labels(args.labels)
    classes = corpus.subtask_labels(args.subtask)
    usable = [i for i in aligned.ids if i in labels]
    if not usable:
        raise DataError("no aligned feature id has a label")
    if len(usable) < len(aligned.ids):
        print(f"# warning: {len(aligned.ids) - len(usable)} feature id(s) without labels")

    spec = corpus.SplitSpec(train_fraction=args.train_fraction, seed=args.seed)
    train_ids, val_ids = corpus.split(usable, spec)
    if not val_ids:
        raise ConfigError("validation split is empty; lower --train-fraction")
    train_examples = [
        corpus.LabeledExample(id=i, text="", label=labels[i]) for i in train_ids
    ]
    cw = corpus.class_weights(train_examples, args.subtask)

    row_of = {example_id: row for row, example_id in enumerate(aligned.ids)}
    index = {c: k for k, c in enumerate(classes)}

    def slice_xy(ids):
        rows = [row_of[i] for i in ids]
        x = aligned.matrix[rows].astype(np.float64)
        y = np.array([index[labels[i]] for i in ids], dtype=np.int64)
        return x, y

    x_train, y_train = slice_xy(train_ids)
    x_val, y_val = slice_xy(val_ids)
    arch = mlp.MlpArchitecture(
        input_dim=aligned.dim_total,
        output_dim=1 if len(classes) == 2 else len(classes),
        dropout_rate=args.dropout,
    )
    config = mlp.TrainConfig(
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        patience=args.patience,
        seed=args.seed,
        decision_threshold=args.threshold,
    )
    result = mlp.train(arch, x_train, y_train, x_val, y_val, cw.vector(classes), config)
    mlp.save_checkpoint(args.out_model, result.params, arch)
    lines = [
        f"epoch={r.epoch} train_loss={r.train_loss:.6g} val_f1={r.val_f1:.6g}"
        for r in result.history
    ]
    lines.append(f"best_epoch={result.best_epoch}")
    lines.append(f"best_val_f1={result.best_f1:.6g}")
    lines.append(f"model={args.out_model}")
    _emit_report(lines, args.report, args)


def cmd_predict(args) -> None:
    feature_paths = args.features.split(",")
    _require_inputs([args.model], feature_paths)
    params, arch = mlp.load_checkpoint(args.model)
    aligned = _load_feature_matrix(feature_paths)
    classes = _classes_for(args.subtask, arch.n_classes)
    preds = mlp.predict(params, arch, aligned, classes, threshold=args.threshold)
    ensemble.write_prob_file(
        args.out, Path(args.model).stem, {i: probs for i, _, probs in preds}
    )
    print(_repro_line(args))


def _read_members(spec: str) -> ensemble.MemberProbabilities:
    paths = spec.split(",")
    _require_inputs(paths)
    return ensemble.MemberProbabilities.from_members(
        [ensemble.read_prob_file(p) for p in paths]
    )


def cmd_vote(args) -> None:
    members = _read_members(args.members)
    weights = [float(w) for w in args.weights.split(",")] if args.weights else None
    ensemble.write_prob_file(args.out, "soft_vote", ensemble.soft_vote(members, weights))
    print(_repro_line(args))


def cmd_stack(args) -> None:
    members = _read_members(args.members)
    _require_inputs([args.labels])
    labels = _read_labels(args.labels)
    classes = _classes_for(args.subtask, members.n_classes)
    cw = corpus.class_weights(
        [corpus.LabeledExample(id=i, text="", label=l) for i, l in labels.items()
         if i in set(members.ids)],
        SUBTASK_BY_CLASS_COUNT[len(classes)],
    )
    config = mlp.TrainConfig(
        max_epochs=args.max_epochs,
        batch_size=args.batch_size,
        patience=args.patience,
        seed=args.seed,
    )
    stacker = ensemble.train_stacker(members, labels, cw, config, classes)
    ensemble.save_stacker(args.out_model, stacker)
    print(f"# stacker trained on members {stacker.member_names}")
    print(_repro_line(args))


def cmd_stack_predict(args) -> None:
    _require_inputs([args.model])
    stacker = ensemble.load_stacker(args.model)
    members = _read_members(args.members)
    ensemble.write_prob_file(args.out, "stacker", ensemble.stack_predict(stacker, members))
    print(_repro_line(args))


def cmd_baseline_nb(args) -> None:
    _require_inputs([args.train, args.test])
    train_rows = _read_examples_tsv(args.train)
    test_rows = _read_examples_tsv(args.test)
    classes = corpus.subtask_labels(args.subtask)
    tfidf, matrix = baseline.tfidf_fit_transform([ex.text for ex in train_rows])
    nb = baseline.nb_train(matrix, [ex.label for ex in train_rows], classes, alpha=args.alpha)
    if args.out_model:
        baseline.save_baseline(args.out_model, tfidf, nb)
    predicted = baseline.nb_predict(nb, baseline.tfidf_transform(tfidf, [ex.text for ex in test_rows]))
    report = metrics.evaluate(
        [(ex.id, label) for ex, label in zip(test_rows, predicted)],
        [(ex.id, ex.label) for ex in test_rows],
        classes,
    )
    _emit_report(
        [metrics.format_report(report), *metrics.report_lines(report)],
        args.out_report,
        args,
    )


def _labels_from_prob_file(path, threshold: float, subtask: str | None) -> dict[int, str]:
    _, table = ensemble.read_prob_file(path)
    n_classes = len(next(iter(table.values())))
    classes = _classes_for(subtask, n_classes)
    out = {}
    for example_id, vec in table.items():
        if len(classes) == 2:
            out[example_id] = classes[1] if vec[1] >= threshold else classes[0]
        else:
            out[example_id] = classes[int(np.argmax(vec))]
    return out


def _infer_subtask(labels: set[str]) -> str:
    for subtask, enum in corpus.SUBTASK_LABELS.items():
        if labels <= set(enum):
            return subtask
    raise ConfigError(f"cannot infer subtask from labels {sorted(labels)}; pass --subtask")


def cmd_evaluate(args) -> None:
    _require_inputs([args.pred, args.gold])
    gold = _read_labels(args.gold)
    with open(args.pred, encoding="utf-8") as fh:
        is_prob_file = fh.readline().startswith("#member=")
    subtask = args.subtask or _infer_subtask(set(gold.values()))
    if is_prob_file:
        preds = _labels_from_prob_file(args.pred, args.threshold, subtask)
    else:
        preds = _read_labels(args.pred)
    classes = corpus.subtask_labels(subtask)
    report = metrics.evaluate(list(preds.items()), list(gold.items()), classes)
    _emit_report(
        [metrics.format_report(report), *metrics.report_lines(report)],
        args.out_report,
        args,
    )


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="offlang",
        description="Offensive-language identification pipeline",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("normalize", help="normalize raw tweet text")
    p.add_argument("--in", dest="in_path", required=True, help="tweet TSV (id<TAB>text)")
    p.add_argument("--out", required=True)
    p.add_argument("--config", help="JSON with table paths; defaults to packaged tables")
    p.set_defaults(func=cmd_normalize)

    p = sub.add_parser("prepare", help="split a gold TSV into text and label files")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--subtask", required=True, choices=["A", "C"])
    p.add_argument("--out-text")
    p.add_argument("--out-labels")
    p.set_defaults(func=cmd_prepare)

    p = sub.add_parser("threshold", help="map confidence scores to OFF/NOT labels")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--out-labels", required=True)
    p.add_argument("--out-text")
    p.add_argument("--conf-column", default="average")
    p.add_argument("--threshold", type=float, default=0.4)
    p.set_defaults(func=cmd_threshold)

    p = sub.add_parser("weigh", help="report cost-sensitive class weights")
    p.add_argument("--in", dest="in_path", required=True)
    p.add_argument("--subtask", required=True, choices=["A", "C"])
    p.set_defaults(func=cmd_weigh)

    p = sub.add_parser("train-head", help="train the dense head on frozen features")
    p.add_argument("--features", required=True, help="comma-separated OFSFEAT1 files")
    p.add_argument("--labels", required=True)
    p.add_argument("--subtask", required=True, choices=["A", "C"])
    p.add_argument("--out-model", required=True)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=3)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--train-fraction", type=float, default=0.9)
    p.add_argument("--dropout", type=float, default=0.1)
    p.add_argument("--report")
    p.set_defaults(func=cmd_train_head)

    p = sub.add_parser("predict", help="run a trained head over feature files")
    p.add_argument("--model", required=True)
    p.add_argument("--features", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--threshold", type=float, default=0.5)
    p.add_argument("--subtask", choices=["A", "C"])
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("vote", help="soft majority voting over member probabilities")
    p.add_argument("--members", required=True, help="comma-separated probability files")
    p.add_argument("--out", required=True)
    p.add_argument("--weights", help="comma-separated member weights")
    p.set_defaults(func=cmd_vote)

    p = sub.add_parser("stack", help="train the logistic-regression meta-model")
    p.add_argument("--members", required=True)
    p.add_argument("--labels", required=True)
    p.add_argument("--out-model", required=True)
    p.add_argument("--subtask", choices=["A", "C"])
    p.add_argument("--max-epochs", type=int, default=200)
    p.add_argument("--batch-size", type=int, default=32)
    p.add_argument("--patience", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_stack)

    p = sub.add_parser("stack-predict", help="apply a trained meta-model")
    p.add_argument("--model", required=True)
    p.add_argument("--members", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_stack_predict)

    p = sub.add_parser("baseline-nb", help="tf-idf + Naive Bayes reference baseline")
    p.add_argument("--train", required=True, help="id<TAB>text<TAB>label TSV")
    p.add_argument("--test", required=True)
    p.add_argument("--out-report")
    p.add_argument("--out-model")
    p.add_argument("--subtask", default="A", choices=["A", "C"])
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_baseline_nb)

    p = sub.add_parser("evaluate", help="score predictions against gold labels")
    p.add_argument("--pred", required=True, help="probability file or id<TAB>label TSV")
    p.add_argument("--gold", required=True, help="id<TAB>label TSV")
    p.add_argument("--out-report")
    p.add_argument("--subtask", choices=["A", "C"])
    p.add_argument("--threshold", type=float, default=0.5)
    p.set_defaults(func=cmd_evaluate)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.func(args)
    except ConfigError as exc:
        print(f"offlang: config error: {exc}", file=sys.stderr)
        return 2
    except NumericError as exc:
        print(f"offlang: numeric error: {exc}", file=sys.stderr)
        return 4
    except (DataError, OfflangError) as exc:
        print(f"offlang: data error: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"offlang: i/o error: {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
