"""Command-line front-end for the whole pipeline.

Subcommands: flavor, train-truecaser, apply-truecaser, eval-truecaser,
train-tagger, eval-tagger, flavor-matrix, reproduce-tables. Exit codes:
0 success, 1 usage error, 2 data error, 3 numeric failure. Every run writes
a manifest next to its outputs.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

import casefold
from casefold import corpus as cp
from casefold import metrics
from casefold.corpus import (
    EmptyCorpus,
    EmptySplit,
    MalformedLine,
    MissingRng,
    OovPolicy,
    Sentence,
    parse_column_corpus,
    serialize_column_corpus,
)
from casefold.flavors import Flavor, MissingTruecaser, UnexpectedTruecaser, make_flavor
from casefold.metrics import EvalReport, LengthMismatch, MalformedTag, format2
from casefold.optim import NonFiniteLoss
from casefold.tagger import (
    EmbeddingSource,
    EmptyFile,
    RaggedDimensions,
    TaggerConfig,
    UnknownLabel,
    evaluate_flavor_matrix,
    evaluate_tagger,
    load_tagger,
    save_tagger,
    train_tagger,
)
from casefold.truecaser import (
    TruecaserConfig,
    apply_truecaser,
    evaluate_truecaser,
    load_truecaser,
    save_truecaser,
    train_truecaser,
)

log = logging.getLogger("casefold")

USAGE_ERRORS = (MissingTruecaser, UnexpectedTruecaser)
DATA_ERRORS = (
    MalformedLine, EmptyCorpus, EmptySplit, MissingRng, UnknownLabel,
    RaggedDimensions, EmptyFile, LengthMismatch, MalformedTag,
    FileNotFoundError, json.JSONDecodeError, ValueError,
)


class _Parser(argparse.ArgumentParser):
    # argparse exits 2 on usage errors; the CLI contract wants 1
    def error(self, message):
        self.print_usage(sys.stderr)
        raise SystemExit2(f"{self.prog}: error: {message}")


class SystemExit2(Exception):
    pass


def _read_corpus(path: str, token_col: int, label_col: int) -> list[Sentence]:
    return parse_column_corpus(Path(path).read_text(encoding="utf-8"), token_col, label_col)


def _write_manifest(out_dir: Path, command: str, config: dict, started: float) -> None:
    manifest = {
        "command": command,
        "config": {k: v for k, v in config.items() if not callable(v)},
        "version": casefold.__version__,
        "wall_time_s": round(time.time() - started, 3),
    }
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n", encoding="utf-8"
    )


# ---- subcommands -------------------------------------------------------


def cmd_flavor(args) -> int:
    started = time.time()
    train = _read_corpus(args.train, args.token_col, args.label_col)
    test = _read_corpus(args.test, args.token_col, args.label_col)
    flavor = Flavor.parse(args.kind)
    truecaser = load_truecaser(args.truecaser) if args.truecaser else None
    fd = make_flavor(train, test, flavor, seed=args.seed, truecaser=truecaser,
                     truecaser_id=args.truecaser)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / f"train.{flavor.value}").write_text(serialize_column_corpus(fd.train), encoding="utf-8")
    (out / "test.c").write_text(serialize_column_corpus(fd.test_cased), encoding="utf-8")
    (out / "test.u").write_text(serialize_column_corpus(fd.test_uncased), encoding="utf-8")
    _write_manifest(out, "flavor", vars(args), started)
    return 0


def cmd_train_truecaser(args) -> int:
    started = time.time()
    train = _read_corpus(args.train, args.token_col, args.label_col)
    dev = _read_corpus(args.dev, args.token_col, args.label_col) if args.dev else []
    kind = "stochastic_at_read" if args.oov == "stochastic" else "frequency_cutoff"
    cfg = TruecaserConfig(
        hidden_size=args.hidden, layers=args.layers, batch_size=args.batch,
        epochs=args.epochs, learning_rate=args.lr,
        oov=OovPolicy(kind, args.oov_rate),
    )
    corpus = cp.LabeledCorpus(train=train, dev=dev, test=[])
    model, train_log = train_truecaser(corpus, cfg, seed=args.seed)
    out = Path(args.out)
    save_truecaser(model, out)
    (out / "training_log.json").write_text(json.dumps(train_log, indent=2) + "\n")
    _write_manifest(out, "train-truecaser", vars(args), started)
    log.info("best dev loss %.4f", min(e["dev_loss"] for e in train_log))
    return 0


def cmd_apply_truecaser(args) -> int:
    model = load_truecaser(args.model)
    text = Path(args.infile).read_text(encoding="utf-8")
    lines = text.splitlines()
    Path(args.outfile).write_text(
        "".join(apply_truecaser(model, line) + "\n" for line in lines), encoding="utf-8"
    )
    return 0


def cmd_eval_truecaser(args) -> int:
    model = load_truecaser(args.model)
    gold = _read_corpus(args.gold, args.token_col, args.label_col)
    f1 = evaluate_truecaser(model, gold)
    print(format2(f1))
    return 0


def _tagger_config(args) -> TaggerConfig:
    emb = EmbeddingSource.parse(args.embeddings)
    # char-embedding runs default to the heavier regularization regime
    dropout = args.dropout if args.dropout is not None else (
        0.5 if emb.kind == "trainable_plus_char" else 0.0)
    lr = args.lr if args.lr is not None else (
        0.015 if emb.kind == "trainable_plus_char" else 0.001)
    return TaggerConfig(
        hidden_units=args.hidden,
        lstm_dropout=dropout,
        recurrent_dropout=args.recurrent_dropout,
        learning_rate=lr,
        head=args.head,
        embedding=emb,
        max_epochs=args.epochs,
        batch_size=args.batch,
    )


def cmd_train_tagger(args) -> int:
    started = time.time()
    train = _read_corpus(args.train, args.token_col, args.label_col)
    dev = _read_corpus(args.dev, args.token_col, args.label_col)
    flavor = Flavor.parse(args.flavor)
    truecaser = load_truecaser(args.truecaser) if args.truecaser else None
    fd = make_flavor(train, train[:1], flavor, seed=args.seed, truecaser=truecaser,
                     truecaser_id=args.truecaser)
    from casefold.flavors import transform_train

    dev_f = transform_train(dev, flavor, seed=args.seed + 1, truecaser=truecaser)
    cfg = _tagger_config(args)
    model, train_log = train_tagger(fd, dev_f, cfg, seed=args.seed)
    out = Path(args.out)
    save_tagger(model, out)
    (out / "training_log.json").write_text(json.dumps(train_log, indent=2) + "\n")
    _write_manifest(out, "train-tagger", vars(args), started)
    log.info("best dev acc %.4f over %d epochs",
             max(e["dev_acc"] for e in train_log), len(train_log))
    return 0


def cmd_eval_tagger(args) -> int:
    model = load_tagger(args.model)
    test = _read_corpus(args.test, args.token_col, args.label_col)
    metric = "token_accuracy" if args.metric == "acc" else "span_f1"
    print(format2(evaluate_tagger(model, test, metric)))
    return 0


# ---- config-file experiments -------------------------------------------


def parse_config_file(path: str | Path) -> dict[str, str]:
    """Flat `key = value` lines; `#` starts a comment; blank lines ignored."""
    out: dict[str, str] = {}
    for line_no, raw in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"{path}:{line_no}: expected `key = value`, got {raw!r}")
        key, value = line.split("=", 1)
        out[key.strip()] = value.strip()
    return out


@dataclass
class ExperimentConfig:
    train: str
    dev: str
    test: str
    task: str = "pos"
    flavors: list[Flavor] = field(default_factory=lambda: list(Flavor))
    seed: int = 0
    token_col: int = 0
    label_col: int = 1
    hidden: int = 64
    embeddings: str = "trainable:32"
    head: str = "crf"
    lr: float | None = None
    epochs: int = 40
    batch: int = 32
    dropout: float | None = None
    recurrent_dropout: float = 0.0
    truecaser: str | None = None
    tables: list[str] = field(default_factory=lambda: ["flavor-matrix"])
    encodings: list[str] = field(default_factory=list)
    datasets: dict[str, tuple[str, str, str]] = field(default_factory=dict)

    @classmethod
    def from_file(cls, path: str | Path) -> "ExperimentConfig":
        raw = parse_config_file(path)
        for req in ("train", "dev", "test", "seed"):
            if req not in raw:
                raise ValueError(f"{path}: missing required key `{req}`")
        datasets = {}
        for key, value in raw.items():
            if key.startswith("dataset."):
                parts = [p.strip() for p in value.split(",")]
                if len(parts) != 3:
                    raise ValueError(f"{path}: `{key}` needs train,dev,test paths")
                datasets[key[len("dataset."):]] = tuple(parts)
        cfg = cls(
            train=raw["train"], dev=raw["dev"], test=raw["test"],
            task=raw.get("task", "pos"),
            flavors=[Flavor.parse(f.strip()) for f in raw.get("flavors", "c,u,cu,cu50,tt,ta").split(",")],
            seed=int(raw["seed"]),
            token_col=int(raw.get("token_col", "0")),
            label_col=int(raw.get("label_col", "1")),
            hidden=int(raw.get("hidden", "64")),
            embeddings=raw.get("embeddings", "trainable:32"),
            head=raw.get("head", "crf"),
            lr=float(raw["lr"]) if "lr" in raw else None,
            epochs=int(raw.get("epochs", "40")),
            batch=int(raw.get("batch", "32")),
            dropout=float(raw["dropout"]) if "dropout" in raw else None,
            recurrent_dropout=float(raw.get("recurrent_dropout", "0.0")),
            truecaser=raw.get("truecaser"),
            tables=[t.strip() for t in raw.get("tables", "flavor-matrix").split(",")],
            encodings=raw.get("encodings", "").split() or [],
            datasets=datasets,
        )
        if cfg.task not in ("pos", "ner"):
            raise ValueError(f"{path}: task must be pos or ner")
        needs_tc = any(f in (Flavor.TT, Flavor.TA) for f in cfg.flavors)
        if needs_tc and not cfg.truecaser:
            raise MissingTruecaser("flavors tt/ta need `truecaser = <model dir>`")
        return cfg

    def tagger_config(self, head: str | None = None, embeddings: str | None = None) -> TaggerConfig:
        emb = EmbeddingSource.parse(embeddings or self.embeddings)
        dropout = self.dropout if self.dropout is not None else (
            0.5 if emb.kind == "trainable_plus_char" else 0.0)
        lr = self.lr if self.lr is not None else (
            0.015 if emb.kind == "trainable_plus_char" else 0.001)
        return TaggerConfig(
            hidden_units=self.hidden,
            lstm_dropout=dropout,
            recurrent_dropout=self.recurrent_dropout,
            learning_rate=lr,
            head=head or self.head,
            embedding=emb,
            max_epochs=self.epochs,
            batch_size=self.batch,
        )


def _run_matrix(cfg: ExperimentConfig, head: str | None = None,
                embeddings: str | None = None,
                splits: tuple[str, str, str] | None = None) -> EvalReport:
    train_p, dev_p, test_p = splits or (cfg.train, cfg.dev, cfg.test)
    train = _read_corpus(train_p, cfg.token_col, cfg.label_col)
    dev = _read_corpus(dev_p, cfg.token_col, cfg.label_col)
    test = _read_corpus(test_p, cfg.token_col, cfg.label_col)
    truecaser = load_truecaser(cfg.truecaser) if cfg.truecaser else None
    metric = "token_accuracy" if cfg.task == "pos" else "span_f1"
    report, _ = evaluate_flavor_matrix(
        train, dev, test, cfg.flavors, cfg.tagger_config(head=head, embeddings=embeddings),
        seed=cfg.seed, metric=metric, truecaser=truecaser, truecaser_id=cfg.truecaser,
    )
    return report


def cmd_flavor_matrix(args) -> int:
    started = time.time()
    cfg = ExperimentConfig.from_file(args.config)
    report = _run_matrix(cfg)
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    metrics.write_report(report, out, as_json=args.json)
    _write_manifest(out.parent, "flavor-matrix", parse_config_file(args.config), started)
    return 0


def cmd_reproduce_tables(args) -> int:
    started = time.time()
    cfg = ExperimentConfig.from_file(args.config)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)

    for table in cfg.tables:
        if table == "flavor-matrix":
            report = _run_matrix(cfg)
            metrics.write_report(report, out / "flavor_matrix.tsv")
        elif table == "crf-ablation":
            no_crf = _run_matrix(cfg, head="softmax")
            with_crf = _run_matrix(cfg, head="crf")
            lines = ["flavor\tno_crf\tcrf"]
            for flavor in cfg.flavors:
                lines.append(
                    f"{flavor.value}\t{format2(no_crf.rows[flavor][2])}"
                    f"\t{format2(with_crf.rows[flavor][2])}"
                )
            (out / "crf_ablation.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        elif table == "encodings":
            if not cfg.encodings:
                raise ValueError("table `encodings` needs `encodings = spec1 spec2 ...`")
            reports = [_run_matrix(cfg, embeddings=e) for e in cfg.encodings]
            lines = ["flavor\t" + "\t".join(cfg.encodings)]
            for flavor in cfg.flavors:
                lines.append(flavor.value + "\t" + "\t".join(
                    format2(r.rows[flavor][2]) for r in reports))
            (out / "encodings.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        elif table == "datasets":
            if not cfg.datasets:
                raise ValueError("table `datasets` needs `dataset.NAME = train,dev,test` lines")
            names = sorted(cfg.datasets)
            reports = [_run_matrix(cfg, splits=cfg.datasets[n]) for n in names]
            lines = ["flavor\t" + "\t".join(names)]
            for flavor in cfg.flavors:
                lines.append(flavor.value + "\t" + "\t".join(
                    format2(r.rows[flavor][2]) for r in reports))
            (out / "datasets.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
        else:
            raise ValueError(f"unknown table kind: {table}")
    _write_manifest(out, "reproduce-tables", parse_config_file(args.config), started)
    return 0


# ---- entry point -------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="casefold", description=__doc__)
    p.add_argument("--verbose", type=int, default=0, choices=(0, 1, 2),
                   help="stderr log level (0 = warnings only)")
    sub = p.add_subparsers(dest="command", required=True)

    def add_cols(sp):
        sp.add_argument("--token-col", type=int, default=0)
        sp.add_argument("--label-col", type=int, default=1)

    sp = sub.add_parser("flavor", help="write one casing flavor of a corpus pair")
    sp.add_argument("--train", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--kind", required=True)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--truecaser")
    sp.add_argument("--out", required=True)
    add_cols(sp)
    sp.set_defaults(func=cmd_flavor)

    sp = sub.add_parser("train-truecaser", help="train the character truecaser")
    sp.add_argument("--train", required=True)
    sp.add_argument("--dev", help="held-out split; defaults to last 10%% of train")
    sp.add_argument("--out", required=True)
    sp.add_argument("--oov", choices=("stochastic", "frequency"), default="frequency")
    sp.add_argument("--oov-rate", type=float, default=0.005)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--hidden", type=int, default=300)
    sp.add_argument("--layers", type=int, default=2)
    sp.add_argument("--epochs", type=int, default=30)
    sp.add_argument("--batch", type=int, default=100)
    sp.add_argument("--lr", type=float, default=0.001)
    add_cols(sp)
    sp.set_defaults(func=cmd_train_truecaser)

    sp = sub.add_parser("apply-truecaser", help="truecase plain text, line = sentence")
    sp.add_argument("--model", required=True)
    sp.add_argument("--in", dest="infile", required=True)
    sp.add_argument("--out", dest="outfile", required=True)
    sp.set_defaults(func=cmd_apply_truecaser)

    sp = sub.add_parser("eval-truecaser", help="char F1 against a labeled corpus")
    sp.add_argument("--model", required=True)
    sp.add_argument("--gold", required=True)
    add_cols(sp)
    sp.set_defaults(func=cmd_eval_truecaser)

    sp = sub.add_parser("train-tagger", help="train a POS/NER tagger on one flavor")
    sp.add_argument("--train", required=True)
    sp.add_argument("--dev", required=True)
    sp.add_argument("--flavor", required=True)
    sp.add_argument("--truecaser")
    sp.add_argument("--head", choices=("crf", "softmax"), default="crf")
    sp.add_argument("--embeddings", default="trainable:128",
                    help="trainable:D | static:PATH | char:WD,CD,CH")
    sp.add_argument("--hidden", type=int, default=512)
    sp.add_argument("--seed", type=int, required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--lr", type=float)
    sp.add_argument("--dropout", type=float)
    sp.add_argument("--recurrent-dropout", type=float, default=0.0)
    sp.add_argument("--epochs", type=int, default=40)
    sp.add_argument("--batch", type=int, default=32)
    add_cols(sp)
    sp.set_defaults(func=cmd_train_tagger)

    sp = sub.add_parser("eval-tagger", help="evaluate a saved tagger")
    sp.add_argument("--model", required=True)
    sp.add_argument("--test", required=True)
    sp.add_argument("--metric", choices=("acc", "span-f1"), default="acc")
    add_cols(sp)
    sp.set_defaults(func=cmd_eval_tagger)

    sp = sub.add_parser("flavor-matrix", help="train per flavor and emit the report table")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.add_argument("--json", action="store_true")
    sp.set_defaults(func=cmd_flavor_matrix)

    sp = sub.add_parser("reproduce-tables", help="emit the experiment tables from a config")
    sp.add_argument("--config", required=True)
    sp.add_argument("--out", required=True)
    sp.set_defaults(func=cmd_reproduce_tables)

    return p


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit2 as exc:
        print(exc, file=sys.stderr)
        return 1
    level = {0: logging.WARNING, 1: logging.INFO, 2: logging.DEBUG}[args.verbose]
    logging.basicConfig(stream=sys.stderr, level=level, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except SystemExit2 as exc:
        print(exc, file=sys.stderr)
        return 1
    except USAGE_ERRORS as exc:
        print(f"casefold: {exc}", file=sys.stderr)
        return 1
    except NonFiniteLoss as exc:
        print(f"casefold: numeric failure: {exc}", file=sys.stderr)
        return 3
    except DATA_ERRORS as exc:
        print(f"casefold: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    raise SystemExit(main())
