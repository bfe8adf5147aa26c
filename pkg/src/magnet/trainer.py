"""Training loop: Adam with global-norm gradient clipping, seeded shuffling,
per-epoch evaluation on both splits, checkpointing on eval improvement, and
early stopping.

Checkpoint files are language-neutral: magic "MAGNET1\\n", a little-endian
u32 tensor count, then per tensor a u32 name length, the UTF-8 name, a u32
rank, u64 dims, and the raw float64 little-endian payload. Tensors are
written in sorted-name order, so the round trip is bit-exact.
"""

from __future__ import annotations

import json
import logging
import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import diffcore as dc
from .corpus import Document, target_vector
from .metrics import (
    binarize,
    confusion_totals,
    hamming_loss,
    metrics_record,
    micro_f1,
)
from .model import MagnetModel

log = logging.getLogger("magnet.trainer")

CHECKPOINT_MAGIC = b"MAGNET1\n"


class TrainingDiverged(RuntimeError):
    def __init__(self, epoch: int, step: int, detail: str):
        super().__init__(f"training diverged at epoch {epoch}, step {step}: {detail}")
        self.epoch = epoch
        self.step = step


def clip_gradients(grads: dict[str, np.ndarray], max_norm: float = 10.0) -> float:
    """Scale all gradients in place so the global L2 norm is at most max_norm."""
    total = 0.0
    for g in grads.values():
        total += float(np.dot(g.reshape(-1), g.reshape(-1)))
    norm = float(np.sqrt(total))
    if not np.isfinite(norm):
        raise FloatingPointError("gradient norm is not finite")
    if norm > max_norm:
        scale = max_norm / norm
        for g in grads.values():
            g *= scale
    return norm


@dataclass
class OptimizerState:
    lr: float
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    t: int = 0
    m: dict[str, np.ndarray] = field(default_factory=dict)
    v: dict[str, np.ndarray] = field(default_factory=dict)


def init_adam(params: dict[str, dc.Tensor], lr: float) -> OptimizerState:
    state = OptimizerState(lr=lr)
    for name, p in params.items():
        state.m[name] = np.zeros_like(p.data)
        state.v[name] = np.zeros_like(p.data)
    return state


def adam_step(
    params: dict[str, dc.Tensor], grads: dict[str, np.ndarray], state: OptimizerState
) -> None:
    """Standard bias-corrected Adam update; parameter set must match state."""
    state.t += 1
    b1, b2 = state.beta1, state.beta2
    correction1 = 1.0 - b1**state.t
    correction2 = 1.0 - b2**state.t
    for name in sorted(grads):
        g = grads[name]
        m = state.m[name]
        v = state.v[name]
        m *= b1
        m += (1.0 - b1) * g
        v *= b2
        v += (1.0 - b2) * g * g
        m_hat = m / correction1
        v_hat = v / correction2
        update = state.lr * m_hat / (np.sqrt(v_hat) + state.eps)
        if not np.all(np.isfinite(update)):
            raise FloatingPointError(f"non-finite update for parameter {name!r}")
        params[name].data = params[name].data - update


@dataclass
class TrainRun:
    config: dict
    seed: int
    history: list[dict] = field(default_factory=list)
    best_epoch: int = 0
    best_eval_f1: float = -1.0
    checkpoint_path: str | None = None
    best_state: dict[str, np.ndarray] | None = None


def evaluate(model: MagnetModel, docs: list[Document]) -> dict:
    """Eval-mode loss, micro-F1 and Hamming loss over a document list."""
    n = len(model.labels)
    targets = np.stack([target_vector(d, n) for d in docs])
    total_loss = 0.0
    logits = np.empty((len(docs), n))
    for i, doc in enumerate(docs):
        out, loss = model.forward(doc.token_ids, targets=targets[i], training=False)
        logits[i] = out.data
        total_loss += loss.item()
    preds = binarize(logits)
    totals = confusion_totals(targets.astype(np.int64), preds)
    return {
        "loss": total_loss / len(docs),
        "micro_f1": micro_f1(totals),
        "hamming_loss": hamming_loss(targets.astype(np.int64), preds),
    }


def train_step(
    model: MagnetModel,
    batch: list[Document],
    state: OptimizerState,
    epoch: int = 0,
    step: int = 0,
) -> float:
    """One optimizer step on a mini-batch; returns the mean per-document loss.

    The batch gradient is the mean of per-document gradients; documents are
    processed individually at true length, then clipping precedes Adam.
    """
    cfg = model.config
    n = len(model.labels)
    model.zero_grad()
    batch_loss = 0.0
    for doc in batch:
        y = target_vector(doc, n)
        try:
            with dc.Graph() as graph:
                _, loss = model.forward(doc.token_ids, targets=y, training=True)
                dc.backward(graph, loss)
        except dc.NonFiniteError as exc:
            raise TrainingDiverged(epoch, step, str(exc)) from exc
        value = loss.item()
        if not np.isfinite(value):
            raise TrainingDiverged(epoch, step, f"loss = {value}")
        batch_loss += value
    params = model.parameters()
    grads = {}
    for name, p in params.items():
        g = p.grad if p.grad is not None else np.zeros_like(p.data)
        grads[name] = g / len(batch)
    clip_gradients(grads, cfg.clip_norm)
    adam_step(params, grads, state)
    return batch_loss / len(batch)


def train(
    model: MagnetModel,
    train_docs: list[Document],
    eval_docs: list[Document],
    out_dir: str | Path | None = None,
    log_lines: list[str] | None = None,
) -> TrainRun:
    """Full run: shuffled mini-batches, per-epoch metrics on both splits,
    checkpoint when eval micro-F1 improves, early stop after `patience`
    epochs without improvement."""
    cfg = model.config
    run = TrainRun(config=cfg.to_dict(), seed=cfg.seed)
    state = init_adam(model.parameters(), cfg.lr)
    shuffle_rng = model.rngs.get("shuffle")
    if shuffle_rng is None:
        raise RuntimeError("model was assembled without a shuffle rng")
    out_path = Path(out_dir) if out_dir is not None else None
    metrics_fh = None
    if out_path is not None:
        out_path.mkdir(parents=True, exist_ok=True)
        metrics_fh = open(out_path / "metrics.jsonl", "w", encoding="utf-8")
    stale = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            order = shuffle_rng.permutation(len(train_docs))
            for step_idx, start in enumerate(range(0, len(order), cfg.batch_size)):
                batch = [train_docs[i] for i in order[start : start + cfg.batch_size]]
                train_step(model, batch, state, epoch, step_idx)
            for split, docs in (("train", train_docs), ("eval", eval_docs)):
                m = evaluate(model, docs)
                entry = {"epoch": epoch, "split": split, **m}
                run.history.append(entry)
                line = metrics_record(epoch, split, m["loss"], m["micro_f1"], m["hamming_loss"])
                if metrics_fh is not None:
                    metrics_fh.write(line + "\n")
                    metrics_fh.flush()
                if log_lines is not None:
                    log_lines.append(line)
                if split == "eval":
                    eval_f1 = m["micro_f1"]
            log.info("epoch %d: eval micro-F1 %.4f", epoch, eval_f1)
            if eval_f1 > run.best_eval_f1:
                run.best_eval_f1 = eval_f1
                run.best_epoch = epoch
                run.best_state = {k: v.copy() for k, v in model.state_arrays().items()}
                stale = 0
                if out_path is not None:
                    ckpt = out_path / "checkpoint.magnet"
                    save_checkpoint(run.best_state, ckpt)
                    run.checkpoint_path = str(ckpt)
            else:
                stale += 1
                if stale > cfg.patience:
                    log.info("early stop at epoch %d", epoch)
                    break
    finally:
        if metrics_fh is not None:
            metrics_fh.close()
    return run


# -- checkpoint format -------------------------------------------------------


def save_checkpoint(state: dict[str, np.ndarray], path) -> None:
    path = Path(path)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(struct.pack("<I", len(state)))
        for name in sorted(state):
            arr = np.asarray(state[name], dtype=np.float64, order="C")
            encoded = name.encode("utf-8")
            fh.write(struct.pack("<I", len(encoded)))
            fh.write(encoded)
            fh.write(struct.pack("<I", arr.ndim))
            for d in arr.shape:
                fh.write(struct.pack("<Q", d))
            fh.write(arr.astype("<f8").tobytes())


def load_checkpoint(path) -> dict[str, np.ndarray]:
    path = Path(path)
    data = path.read_bytes()
    if data[:8] != CHECKPOINT_MAGIC:
        raise ValueError(f"{path}: bad checkpoint header, expected magic {CHECKPOINT_MAGIC!r}")
    off = 8

    def take(n: int) -> bytes:
        nonlocal off
        if off + n > len(data):
            raise ValueError(f"{path}: truncated checkpoint")
        chunk = data[off : off + n]
        off += n
        return chunk

    (count,) = struct.unpack("<I", take(4))
    out: dict[str, np.ndarray] = {}
    for _ in range(count):
        (name_len,) = struct.unpack("<I", take(4))
        name = take(name_len).decode("utf-8")
        (rank,) = struct.unpack("<I", take(4))
        dims = tuple(struct.unpack("<Q", take(8))[0] for _ in range(rank))
        n_values = int(np.prod(dims)) if dims else 1
        payload = take(8 * n_values)
        out[name] = np.frombuffer(payload, dtype="<f8").reshape(dims).copy()
    if off != len(data):
        raise ValueError(f"{path}: trailing bytes after last tensor")
    return out


def save_run_meta(path, config, vocab, labels) -> None:
    meta = {
        "config": config.to_dict(),
        "vocab": vocab.index_to_token,
        "labels": labels.names,
    }
    Path(path).write_text(json.dumps(meta, sort_keys=True), encoding="utf-8")


def load_run_meta(path) -> dict:
    return json.loads(Path(path).read_text(encoding="utf-8"))
