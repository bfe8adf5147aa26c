"""Command-line interface: train, eval, predict, inspect-adjacency, ablate.

Configuration is a flat key=value text file overridden by command-line
flags; every run snapshots its resolved configuration into the output
directory. Exit codes: 0 success, 2 input or configuration error, 3 runtime
failure such as divergence.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .corpus import LabelSpace, Vocabulary, load_records, make_documents
from .kernels import BACKEND
from .metrics import binarize, confusion_totals, hamming_loss, micro_f1
from .model import MagnetConfig, MagnetModel, assemble, seeded_rngs
from .trainer import (
    TrainingDiverged,
    evaluate,
    load_checkpoint,
    load_run_meta,
    save_checkpoint,
    save_run_meta,
    train,
)

log = logging.getLogger("magnet.cli")

EXIT_OK = 0
EXIT_INPUT = 2
EXIT_RUNTIME = 3


# -- config resolution --------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(MagnetConfig)}


def _coerce(name: str, raw: str):
    if name not in _FIELD_TYPES:
        raise ValueError(f"unknown config key {name!r}")
    raw = raw.strip()
    ftype = _FIELD_TYPES[name]
    if name == "gat_dims":
        if raw.lower() in ("none", ""):
            return None
        return tuple(int(x) for x in raw.split(","))
    if ftype == "bool":
        if raw.lower() in ("true", "1", "yes"):
            return True
        if raw.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"config key {name!r}: expected a boolean, got {raw!r}")
    if ftype == "int":
        return int(raw)
    if ftype == "float":
        return float(raw)
    return raw


def parse_config_file(path) -> dict:
    values = {}
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            stripped = line.strip()
            if not stripped or stripped.startswith("#"):
                continue
            if "=" not in stripped:
                raise ValueError(f"{path}:{lineno}: expected key=value, got {stripped!r}")
            key, _, raw = stripped.partition("=")
            values[key.strip()] = _coerce(key.strip(), raw)
    return values


def resolve_config(args) -> MagnetConfig:
    values: dict = {}
    if getattr(args, "config", None):
        values.update(parse_config_file(args.config))
    flag_map = {
        "seed": "seed",
        "adjacency": "adjacency_init",
        "layer_mode": "layer_mode",
        "heads": "heads",
        "hidden": "hidden_size",
        "epochs": "epochs",
    }
    for flag, key in flag_map.items():
        val = getattr(args, flag, None)
        if val is not None:
            values[key] = val
    for pair in getattr(args, "set", None) or []:
        if "=" not in pair:
            raise ValueError(f"--set expects key=value, got {pair!r}")
        key, _, raw = pair.partition("=")
        values[key.strip()] = _coerce(key.strip(), raw)
    cfg = MagnetConfig(**values)
    cfg.validate()
    return cfg


def snapshot_config(cfg: MagnetConfig, out_dir: Path) -> None:
    lines = [f"# kernel_backend={BACKEND}"]
    for key, value in sorted(cfg.to_dict().items()):
        if key == "gat_dims":
            value = "none" if value is None else ",".join(str(v) for v in value)
        lines.append(f"{key}={value}")
    (out_dir / "config.resolved").write_text("\n".join(lines) + "\n", encoding="utf-8")


# -- model restore -------------------------------------------------------------


def restore_model(checkpoint_path) -> MagnetModel:
    """Rebuild a model from a checkpoint plus its sidecar meta file."""
    ckpt_path = Path(checkpoint_path)
    meta_path = ckpt_path.with_suffix(".meta.json")
    if not ckpt_path.exists():
        raise FileNotFoundError(f"checkpoint not found: {ckpt_path}")
    if not meta_path.exists():
        raise FileNotFoundError(f"checkpoint meta not found: {meta_path}")
    meta = load_run_meta(meta_path)
    config = MagnetConfig.from_dict(meta["config"])
    vocab = Vocabulary.from_tokens(meta["vocab"], config.vocab_max_size)
    labels = LabelSpace.from_names(meta["labels"])
    arrays = load_checkpoint(ckpt_path)
    # Shapes and values come from the checkpoint; build with placeholder
    # tensors of the right dimensions, then overwrite.
    rngs = seeded_rngs(config.seed)
    from .embeddings import random_table

    table = random_table(vocab, config.embedding_dim, rngs["embeddings"])
    label_matrix = np.zeros((len(labels), config.embedding_dim))
    build_cfg = dataclasses.replace(config, adjacency_init="identity")
    model = MagnetModel.build(
        build_cfg, vocab, labels, table, label_matrix, None, rngs["init"], rngs
    )
    model.config = config
    model.adjacency.init_scheme = config.adjacency_init
    model.load_state(arrays)
    return model


def _encode_split(path, model: MagnetModel, require_labels=True):
    records = load_records(path, require_labels=require_labels)
    try:
        return records, make_documents(
            records,
            model.vocab,
            model.labels,
            model.config.max_doc_tokens,
            require_labels=require_labels,
        )
    except KeyError as exc:
        raise ValueError(
            f"label-space mismatch between checkpoint and {path}: {exc.args[0]}"
        ) from None


# -- commands ------------------------------------------------------------------


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_records = load_records(args.train)
    model, train_docs = assemble(cfg, train_records, args.embeddings)
    if args.test:
        _, eval_docs = _encode_split(args.test, model)
    else:
        log.info("no --test split given; evaluating on the training split")
        eval_docs = train_docs
    snapshot_config(cfg, out_dir)
    run = train(model, train_docs, eval_docs, out_dir=out_dir)
    save_run_meta(out_dir / "checkpoint.meta.json", cfg, model.vocab, model.labels)
    if run.checkpoint_path is None:  # no epoch improved; persist final state
        save_checkpoint(model.state_arrays(), out_dir / "checkpoint.magnet")
    print(
        f"trained {cfg.epochs} epoch budget, best eval micro-F1 {run.best_eval_f1:.4f} "
        f"at epoch {run.best_epoch}; artifacts in {out_dir}"
    )
    return EXIT_OK


def cmd_eval(args) -> int:
    model = restore_model(args.checkpoint)
    _, docs = _encode_split(args.test, model)
    m = evaluate(model, docs)
    record = json.dumps(
        {
            "split": "test",
            "loss": m["loss"],
            "micro_f1": m["micro_f1"],
            "hamming_loss": m["hamming_loss"],
            "n_documents": len(docs),
        }
    )
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "eval_metrics.json").write_text(record + "\n", encoding="utf-8")
    print(f"micro-F1 {m['micro_f1']:.4f}  hamming-loss {m['hamming_loss']:.4f}")
    print(record)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = restore_model(args.checkpoint)
    records, docs = _encode_split(args.input, model, require_labels=False)
    logits, preds = model.predict(docs)
    probs = 1.0 / (1.0 + np.exp(-logits))
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    out_path = out_dir / "predictions.jsonl"
    with open(out_path, "w", encoding="utf-8") as fh:
        for rec, pred, prob in zip(records, preds, probs):
            names = [model.labels.names[i] for i in np.flatnonzero(pred)]
            fh.write(
                json.dumps(
                    {
                        "text": rec["text"],
                        "labels": names,
                        "scores": {n: float(p) for n, p in zip(model.labels.names, prob)},
                    }
                )
                + "\n"
            )
    print(f"wrote {out_path}")
    return EXIT_OK


def cmd_inspect_adjacency(args) -> int:
    model = restore_model(args.checkpoint)
    a = model.tensors["adjacency"].data
    names = model.labels.names
    out_dir = Path(args.out) if args.out else Path(args.checkpoint).parent
    out_dir.mkdir(parents=True, exist_ok=True)
    lines = ["\t".join(["label", *names])]
    for name, row_vals in zip(names, a):
        lines.append("\t".join([name, *(f"{v:.6g}" for v in row_vals)]))
    (out_dir / "adjacency.tsv").write_text("\n".join(lines) + "\n", encoding="utf-8")
    sym = 0.5 * (a + a.T)
    pairs = []
    for i in range(len(names)):
        for j in range(i + 1, len(names)):
            pairs.append((abs(sym[i, j]), sym[i, j], names[i], names[j]))
    pairs.sort(reverse=True)
    top = pairs[: args.top_k]
    pair_lines = [f"{ni}\t{nj}\t{val:.6g}" for _, val, ni, nj in top]
    (out_dir / "adjacency_pairs.tsv").write_text("\n".join(pair_lines) + "\n", encoding="utf-8")
    print(f"adjacency written to {out_dir / 'adjacency.tsv'}")
    for _, val, ni, nj in top:
        print(f"{ni} ~ {nj}: {val:.4f}")
    return EXIT_OK


ABLATION_VARIANTS = {
    "adjacency-init": [
        ("identity", {"adjacency_init": "identity"}),
        ("xavier", {"adjacency_init": "xavier"}),
        ("cooccurrence", {"adjacency_init": "cooccurrence"}),
    ],
    "gat-vs-gcn": [
        ("gat", {"layer_mode": "gat"}),
        ("gcn", {"layer_mode": "gcn"}),
    ],
}


def cmd_ablate(args) -> int:
    base_cfg = resolve_config(args)
    out_dir = Path(args.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    train_records = load_records(args.train)
    rows = []
    for name, overrides in ABLATION_VARIANTS[args.kind]:
        cfg = dataclasses.replace(base_cfg, **overrides)
        cfg.validate()
        model, train_docs = assemble(cfg, train_records, args.embeddings)
        if args.test:
            _, eval_docs = _encode_split(args.test, model)
        else:
            eval_docs = train_docs
        variant_dir = out_dir / name
        variant_dir.mkdir(parents=True, exist_ok=True)
        snapshot_config(cfg, variant_dir)
        run = train(model, train_docs, eval_docs, out_dir=variant_dir)
        save_run_meta(variant_dir / "checkpoint.meta.json", cfg, model.vocab, model.labels)
        final = [h for h in run.history if h["split"] == "eval"][-1]
        rows.append(
            {
                "variant": name,
                "final_micro_f1": final["micro_f1"],
                "final_hamming_loss": final["hamming_loss"],
                "final_loss": final["loss"],
                "best_micro_f1": run.best_eval_f1,
                "epochs_run": final["epoch"],
            }
        )
    header = ["variant", "final_micro_f1", "final_hamming_loss", "final_loss", "best_micro_f1", "epochs_run"]
    table_lines = ["\t".join(header)]
    for r in rows:
        table_lines.append(
            "\t".join(
                [
                    r["variant"],
                    f"{r['final_micro_f1']:.4f}",
                    f"{r['final_hamming_loss']:.4f}",
                    f"{r['final_loss']:.6f}",
                    f"{r['best_micro_f1']:.4f}",
                    str(r["epochs_run"]),
                ]
            )
        )
    table = "\n".join(table_lines)
    (out_dir / "ablation.tsv").write_text(table + "\n", encoding="utf-8")
    print(f"ablation: {args.kind}")
    print(table)
    return EXIT_OK


# -- entry point ---------------------------------------------------------------


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="flat key=value config file")
    p.add_argument("--seed", type=int)
    p.add_argument("--adjacency", choices=["identity", "xavier", "cooccurrence"])
    p.add_argument("--layer-mode", dest="layer_mode", choices=["gat", "gcn"])
    p.add_argument("--heads", type=int)
    p.add_argument("--hidden", type=int)
    p.add_argument("--epochs", type=int)
    p.add_argument("--set", action="append", metavar="KEY=VALUE", help="override any config key")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(
        prog="magnet",
        description="multi-label text classifier with graph attention over a learnable label graph",
        epilog="exit codes: 0 success, 2 input/config error, 3 runtime failure",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("train", help="train a model and write run artifacts")
    p.add_argument("--train", required=True, help="training dataset (JSON lines)")
    p.add_argument("--test", help="evaluation dataset; defaults to the training split")
    p.add_argument("--embeddings", help="word-vector text file; random table when omitted")
    p.add_argument("--out", required=True, help="output directory")
    _add_config_flags(p)
    p.set_defaults(fn=cmd_train)

    p = sub.add_parser("eval", help="evaluate a checkpoint on a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--test", required=True)
    p.add_argument("--out", help="output directory (default: checkpoint directory)")
    p.set_defaults(fn=cmd_eval)

    p = sub.add_parser("predict", help="write label predictions for a dataset")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--input", required=True)
    p.add_argument("--out", help="output directory (default: checkpoint directory)")
    p.set_defaults(fn=cmd_predict)

    p = sub.add_parser("inspect-adjacency", help="dump the learned label adjacency")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--out", help="output directory (default: checkpoint directory)")
    p.add_argument("--top-k", dest="top_k", type=int, default=10)
    p.set_defaults(fn=cmd_inspect_adjacency)

    p = sub.add_parser("ablate", help="run a variant comparison on shared data and seed")
    p.add_argument("--kind", required=True, choices=sorted(ABLATION_VARIANTS))
    p.add_argument("--train", required=True)
    p.add_argument("--test")
    p.add_argument("--embeddings")
    p.add_argument("--out", required=True)
    _add_config_flags(p)
    p.set_defaults(fn=cmd_ablate)
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except TrainingDiverged as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except (ValueError, KeyError, OSError) as exc:
        if isinstance(exc, OSError) and exc.filename:
            msg = f"{exc.strerror}: {exc.filename}"
        elif isinstance(exc, KeyError) and exc.args:
            msg = exc.args[0]
        else:
            msg = str(exc)
        print(f"error: {msg}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    raise SystemExit(main())
