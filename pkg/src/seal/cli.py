"""Command-line entry points: preprocess, train, tag, eval, serve.

Training commands read one ``key = value`` config file each, overridable
with repeated ``--set key=value`` flags; the resolved configuration is
logged before the run.  ``SEAL_SEED`` in the environment overrides any
configured seed.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

from .classify import ClassifierConfig, build_training_set, load_forest, save_forest, train_forest
from .corpus import load_corpus, load_split, parse_brat, project_bilou
from .embed import load_table
from .errors import SealError
from .evaluate import (
    Protocol,
    corpus_classification_given_gold,
    corpus_span_f1,
)
from .pipeline import Annotator, annotate
from .service import make_server
from .train import (
    ContextualSource,
    ExtractorConfig,
    StaticSource,
    load_checkpoint,
    save_checkpoint,
    train_extractor,
)

__all__ = ["main"]

logger = logging.getLogger(__name__)


# ---------------------------------------------------------------------------
# Config files
# ---------------------------------------------------------------------------


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Read ``key = value`` lines; ``#`` starts a comment."""
    config: dict[str, str] = {}
    text = Path(path).read_text(encoding="utf-8")
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise SealError(f"{path}:{lineno}: expected 'key = value', got {raw!r}")
        key, value = line.split("=", 1)
        config[key.strip()] = value.strip()
    return config


def _apply_overrides(config: dict[str, str], sets: list[str]) -> None:
    for item in sets or []:
        if "=" not in item:
            raise SealError(f"--set expects key=value, got {item!r}")
        key, value = item.split("=", 1)
        config[key.strip()] = value.strip()


def _log_resolved(name: str, config: dict) -> None:
    logger.info(
        "%s config: %s",
        name,
        " ".join(f"{k}={config[k]}" for k in sorted(config)),
    )


def _as_bool(value: str, key: str) -> bool:
    lowered = value.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise SealError(f"config key {key}: expected a boolean, got {value!r}")


def _take(config: dict[str, str], key: str, cast, default):
    if key not in config:
        if default is None:
            raise SealError(f"config key {key!r} is required")
        return default
    value = config[key]
    if cast is bool:
        return _as_bool(value, key)
    try:
        return cast(value)
    except ValueError:
        raise SealError(f"config key {key}: cannot parse {value!r}") from None


def _seed_override(seed: int) -> int:
    env = os.environ.get("SEAL_SEED")
    if env is None:
        return seed
    try:
        override = int(env)
    except ValueError:
        raise SealError(f"SEAL_SEED must be an integer, got {env!r}") from None
    logger.info("SEAL_SEED=%d overrides configured seed %d", override, seed)
    return override


# ---------------------------------------------------------------------------
# Commands
# ---------------------------------------------------------------------------


def cmd_preprocess(args: argparse.Namespace) -> int:
    corpus = load_corpus(args.data_dir)
    if not corpus:
        raise SealError(f"no splits with .txt documents under {args.data_dir}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for split, docs in corpus.items():
        lines = []
        for doc in docs:
            labels = [label.name for label in project_bilou(doc)]
            lines.append(
                json.dumps(
                    {
                        "id": doc.id,
                        "text": doc.text,
                        "tokens": [
                            [t.start, t.end, t.surface] for t in doc.tokens
                        ],
                        "labels": labels,
                        "spans": [
                            [s.id, s.klass, s.start, s.end, s.surface]
                            for s in doc.gold_spans
                        ],
                    },
                    ensure_ascii=False,
                    sort_keys=True,
                )
            )
        (out / f"{split}.jsonl").write_text(
            "\n".join(lines) + "\n", encoding="utf-8"
        )
        print(f"{split}: {len(docs)} documents")
    return 0


def cmd_train_extract(args: argparse.Namespace) -> int:
    config = parse_config_file(args.config)
    _apply_overrides(config, args.set)
    _log_resolved("train-extract", config)

    data_dir = Path(_take(config, "data_dir", str, None))
    out = Path(_take(config, "out", str, None))
    train_split = _take(config, "train_split", str, "train")
    dev_split = _take(config, "dev_split", str, "dev")
    train_docs = load_split(data_dir / train_split)
    dev_docs = load_split(data_dir / dev_split) if dev_split else []

    widths = tuple(
        int(w) for w in str(_take(config, "layer_output_sizes", str, "96,48,24")).split(",")
    )
    extractor_config = ExtractorConfig(
        layer_output_sizes=widths,
        learning_rate=_take(config, "learning_rate", float, 1e-3),
        max_epochs=_take(config, "max_epochs", int, 50),
        patience=_take(config, "patience", int, 5),
        grad_clip_norm=_take(config, "grad_clip_norm", float, 5.0),
        batch_size=_take(config, "batch_size", int, 8),
        seed=_seed_override(_take(config, "seed", int, 42)),
        mask_decoding=_take(config, "mask_decoding", bool, True),
    )

    if "cemb_dir" in config:
        source = ContextualSource.open(config["cemb_dir"], train_docs + dev_docs)
    else:
        table = load_table(_take(config, "embeddings", str, None))
        source = StaticSource(table)

    model, history = train_extractor(train_docs, dev_docs, source, extractor_config)
    save_checkpoint(model, out)
    for record in history:
        dev_f1 = record["dev_f1"]
        shown = f"{dev_f1:.4f}" if dev_f1 is not None else "-"
        print(
            f"epoch {record['epoch']:3d}  train_nll {record['train_nll']:.4f}  "
            f"dev_f1 {shown}"
        )
    if model.best_epoch is not None:
        print(f"best epoch {model.best_epoch} dev_f1 {model.best_dev_f1:.4f}")
    print(f"checkpoint written to {out}")
    return 0


def cmd_train_classify(args: argparse.Namespace) -> int:
    config = parse_config_file(args.config)
    _apply_overrides(config, args.set)
    _log_resolved("train-classify", config)

    data_dir = Path(_take(config, "data_dir", str, None))
    out = Path(_take(config, "out", str, None))
    train_split = _take(config, "train_split", str, "train")
    table = load_table(_take(config, "embeddings", str, None))
    docs = load_split(data_dir / train_split)

    classifier_config = ClassifierConfig(
        n_trees=_take(config, "n_trees", int, 200),
        max_depth=_take(config, "max_depth", int, 0),
        min_samples_split=_take(config, "min_samples_split", int, 2),
        features_per_split=_take(config, "features_per_split", int, 0),
        bootstrap=_take(config, "bootstrap", bool, True),
        seed=_seed_override(_take(config, "seed", int, 42)),
    )
    x, y = build_training_set(docs, table)
    forest = train_forest(x, y, classifier_config)
    save_forest(out, forest)
    print(f"trained {classifier_config.n_trees} trees on {x.shape[0]} rows")
    print(f"forest written to {out}")
    return 0


def _load_annotator(args: argparse.Namespace) -> Annotator:
    model = load_checkpoint(args.model)
    forest = load_forest(args.classifier)
    table = load_table(args.embeddings)
    return Annotator(model=model, forest=forest, extract_table=table)


def cmd_tag(args: argparse.Namespace) -> int:
    annotator = _load_annotator(args)
    if args.input:
        text = Path(args.input).read_text(encoding="utf-8")
    else:
        text = sys.stdin.read()
    result = annotate(annotator, text)
    print(json.dumps(result.to_dict(), ensure_ascii=False, indent=2, sort_keys=True))
    return 0


def cmd_eval(args: argparse.Namespace) -> int:
    gold_docs = load_split(args.gold)
    if not gold_docs:
        raise SealError(f"no documents under {args.gold}")
    pred_dir = Path(args.pred)
    predictions: dict[str, list] = {}
    for doc in gold_docs:
        ann_path = pred_dir / f"{doc.id}.ann"
        if ann_path.exists():
            predictions[doc.id] = parse_brat(
                ann_path.read_text(encoding="utf-8"), doc
            )
        else:
            logger.warning("no prediction file for %s", doc.id)
            predictions[doc.id] = []

    gold = {doc.id: doc.gold_spans for doc in gold_docs}
    if args.protocol == Protocol.CLASSIFICATION.value:
        predicted_classes: dict[str, dict[str, str]] = {}
        for doc in gold_docs:
            by_offset = {(s.start, s.end): s for s in doc.gold_spans}
            doc_pred: dict[str, str] = {}
            for span in predictions[doc.id]:
                gold_span = by_offset.get((span.start, span.end))
                if gold_span is None or span.klass is None:
                    logger.warning(
                        "%s: prediction %s does not match a gold span; ignored",
                        doc.id,
                        span.id,
                    )
                    continue
                doc_pred[gold_span.id] = span.klass
            predicted_classes[doc.id] = doc_pred
        report = corpus_classification_given_gold(gold, predicted_classes)
    else:
        typed = args.protocol == Protocol.TYPED.value
        report = corpus_span_f1(gold, predictions, typed=typed)
    print(report.to_json() if args.json else report.format_text())
    return 0


def cmd_serve(args: argparse.Namespace) -> int:
    annotator = _load_annotator(args)
    try:
        server = make_server(annotator, args.port, host=args.host)
    except OSError as exc:
        raise SealError(f"cannot bind {args.host}:{args.port}: {exc}") from exc
    host, port = server.server_address[:2]
    print(f"serving on http://{host}:{port} (POST /annotate, GET /health, /demo)")
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    finally:
        server.server_close()
    return 0


# ---------------------------------------------------------------------------
# Parser
# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="seal",
        description="Keyphrase extraction and classification for scientific text.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("preprocess", help="tokenize a corpus and cache BILOU labels")
    p.add_argument("--data-dir", required=True)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_preprocess)

    for name, func in (
        ("train-extract", cmd_train_extract),
        ("train-classify", cmd_train_classify),
    ):
        p = sub.add_parser(name, help=f"run {name} from a config file")
        p.add_argument("--config", required=True)
        p.add_argument(
            "--set",
            action="append",
            default=[],
            metavar="KEY=VALUE",
            help="override a config value (repeatable)",
        )
        p.set_defaults(func=func)

    p = sub.add_parser("tag", help="annotate text from a file or stdin")
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--input", default=None)
    p.set_defaults(func=cmd_tag)

    p = sub.add_parser("eval", help="score predictions against gold annotations")
    p.add_argument("--gold", required=True)
    p.add_argument("--pred", required=True)
    p.add_argument(
        "--protocol",
        required=True,
        choices=[proto.value for proto in Protocol],
    )
    p.add_argument("--json", action="store_true", help="emit the JSON report")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("serve", help="run the HTTP annotation service")
    p.add_argument("--model", required=True)
    p.add_argument("--classifier", required=True)
    p.add_argument("--embeddings", required=True)
    p.add_argument("--port", type=int, required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(
        level=logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SealError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    raise SystemExit(main())
