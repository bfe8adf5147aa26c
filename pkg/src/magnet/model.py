"""End-to-end model assembly: sentence feature, attended label features,
per-label scores, and the training loss.

The final graph layer's output dimension must equal the encoder feature
dimension 2h; scores are the matrix-vector product of the attended label
features with the sentence feature, one logit per label. A label is
predicted when its logit is positive (sigmoid > 0.5).
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict

import numpy as np

from . import diffcore as dc
from .corpus import (
    CooccurrenceStats,
    Document,
    LabelSpace,
    Vocabulary,
    build_cooccurrence,
    build_label_space,
    build_vocab,
    make_documents,
    tokenize,
)
from .embeddings import (
    EmbeddingTable,
    build_label_matrix,
    load_embedding_file,
    random_table,
)
from .encoder import EncoderParams, encode_sequence, init_encoder_params
from .labelgraph import (
    ADJACENCY_SCHEMES,
    AdjacencyMatrix,
    init_adjacency,
    init_gat_stack,
    init_gcn_stack,
    stack_forward,
)


@dataclass
class MagnetConfig:
    vocab_max_size: int = 20000
    embedding_dim: int = 64
    hidden_size: int = 32
    gat_dims: tuple[int, ...] | None = None  # per-layer output dims; default (d_e, 2h)
    heads: int = 4
    adjacency_init: str = "xavier"
    adjacency_trainable: bool = True
    layer_mode: str = "gat"
    dropout: float = 0.5
    attention_softmax: bool = True
    pooling: str = "last"
    seed: int = 0
    lr: float = 1e-3
    batch_size: int = 32
    epochs: int = 50
    patience: int = 10
    clip_norm: float = 10.0
    max_doc_tokens: int = 400
    train_token_embeddings: bool = True
    train_label_embeddings: bool = False
    encoder_backend: str = "fused"

    def layer_dims(self) -> tuple[int, ...]:
        """Full dimension chain d_e -> ... -> 2h for the graph layer stack."""
        out_dims = self.gat_dims or (self.embedding_dim, 2 * self.hidden_size)
        return (self.embedding_dim, *out_dims)

    def validate(self) -> None:
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.heads < 1:
            raise ValueError(f"heads must be >= 1, got {self.heads}")
        if self.adjacency_init not in ADJACENCY_SCHEMES:
            raise ValueError(f"unknown adjacency init {self.adjacency_init!r}")
        if self.layer_mode not in ("gat", "gcn"):
            raise ValueError(f"unknown layer mode {self.layer_mode!r}")
        if self.pooling not in ("last", "mean"):
            raise ValueError(f"unknown pooling {self.pooling!r}")
        if self.encoder_backend not in ("fused", "composed"):
            raise ValueError(f"unknown encoder backend {self.encoder_backend!r}")
        dims = self.layer_dims()
        if dims[-1] != 2 * self.hidden_size:
            raise ValueError(
                f"final graph layer dim {dims[-1]} must equal encoder output {2 * self.hidden_size}"
            )

    def to_dict(self) -> dict:
        d = asdict(self)
        d["gat_dims"] = list(self.gat_dims) if self.gat_dims is not None else None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MagnetConfig":
        d = dict(d)
        if d.get("gat_dims") is not None:
            d["gat_dims"] = tuple(d["gat_dims"])
        return cls(**d)


def predict_logits(feature: dc.Tensor, label_features: dc.Tensor) -> dc.Tensor:
    """Per-label scores: each attended label row acts as a classifier on F."""
    if label_features.data.shape[1] != feature.data.shape[0]:
        raise dc.ShapeMismatchError(
            f"predict: label features {label_features.data.shape} "
            f"incompatible with feature {feature.data.shape}"
        )
    return dc.matmul(label_features, feature)


def bce_loss(logits: dc.Tensor, targets) -> dc.Tensor:
    """Sigmoid cross-entropy summed over labels, stable form, lower is better."""
    return dc.bce_with_logits(logits, targets)


class MagnetModel:
    """Parameter container plus the forward pass."""

    def __init__(self, config, vocab, labels, tensors, adjacency, encoder, layers, rngs):
        self.config = config
        self.vocab: Vocabulary = vocab
        self.labels: LabelSpace = labels
        self.tensors: dict[str, dc.Tensor] = tensors  # every persistent tensor by name
        self.adjacency: AdjacencyMatrix = adjacency
        self.encoder: EncoderParams = encoder
        self.layers = layers
        self.rngs = rngs  # dropout/shuffle generators, seeded at assembly

    # -- construction ------------------------------------------------------

    @classmethod
    def build(
        cls,
        config: MagnetConfig,
        vocab: Vocabulary,
        labels: LabelSpace,
        table: EmbeddingTable,
        label_matrix: np.ndarray,
        stats: CooccurrenceStats | None,
        init_rng: np.random.Generator,
        rngs: dict | None = None,
    ) -> "MagnetModel":
        config.validate()
        n = len(labels)
        dims = config.layer_dims()
        adjacency = init_adjacency(
            config.adjacency_init,
            n,
            stats=stats,
            rng=init_rng,
            trainable=config.adjacency_trainable,
        )
        encoder = init_encoder_params(config.embedding_dim, config.hidden_size, init_rng)
        if config.layer_mode == "gat":
            layers = init_gat_stack(dims, config.heads, init_rng)
        else:
            layers = init_gcn_stack(dims, init_rng)

        tensors: dict[str, dc.Tensor] = {}
        emb = dc.Tensor(table.vectors, requires_grad=table.trainable and config.train_token_embeddings)
        tensors["embeddings.tokens"] = emb
        m = dc.Tensor(label_matrix, requires_grad=config.train_label_embeddings)
        tensors["labels.embedding"] = m
        tensors["adjacency"] = adjacency.matrix
        tensors.update(encoder.named_tensors())
        for li, layer in enumerate(layers):
            if config.layer_mode == "gat":
                for hi, head in enumerate(layer.heads):
                    tensors[f"gat.{li}.h{hi}.w"] = head.w
                    tensors[f"gat.{li}.h{hi}.a"] = head.a
            else:
                tensors[f"gcn.{li}.w"] = layer.w
        return cls(config, vocab, labels, tensors, adjacency, encoder, layers, rngs or {})

    # -- parameter access ----------------------------------------------------

    def parameters(self) -> dict[str, dc.Tensor]:
        return {k: t for k, t in self.tensors.items() if t.requires_grad}

    def state_arrays(self) -> dict[str, np.ndarray]:
        return {k: t.data for k, t in self.tensors.items()}

    def load_state(self, arrays: dict[str, np.ndarray]) -> None:
        for name, arr in arrays.items():
            if name not in self.tensors:
                raise KeyError(f"unknown tensor name in checkpoint: {name!r}")
            t = self.tensors[name]
            if t.data.shape != arr.shape:
                raise ValueError(
                    f"checkpoint tensor {name!r} has shape {arr.shape}, expected {t.data.shape}"
                )
            t.data = np.ascontiguousarray(arr, dtype=np.float64)

    def zero_grad(self) -> None:
        for t in self.tensors.values():
            t.zero_grad()

    # -- forward -------------------------------------------------------------

    def label_features(self) -> dc.Tensor:
        return stack_forward(
            self.tensors["labels.embedding"],
            self.tensors["adjacency"],
            self.layers,
            mode=self.config.layer_mode,
            use_softmax=self.config.attention_softmax,
        )

    def forward(
        self,
        token_ids,
        targets: np.ndarray | None = None,
        training: bool = False,
    ) -> tuple[dc.Tensor, dc.Tensor | None]:
        """Encode one document and score every label; loss when targets given.

        Dropout is applied only when training is true and p > 0, to the token
        embeddings entering the LSTM and to the pooled feature vector.
        """
        cfg = self.config
        x = dc.gather_rows(self.tensors["embeddings.tokens"], token_ids)
        p = cfg.dropout
        use_dropout = training and p > 0.0
        if use_dropout:
            x = dc.dropout_apply(x, self._mask(x.data.shape, p))
        enc = encode_sequence(x, self.encoder, pooling=cfg.pooling, backend=cfg.encoder_backend)
        feature = enc.feature
        if use_dropout:
            feature = dc.dropout_apply(feature, self._mask(feature.data.shape, p))
        logits = predict_logits(feature, self.label_features())
        loss = bce_loss(logits, targets) if targets is not None else None
        return logits, loss

    def _mask(self, shape, p: float) -> np.ndarray:
        rng = self.rngs.get("dropout")
        if rng is None:
            raise RuntimeError("dropout requested but no dropout rng was configured")
        return (rng.random(shape) >= p) / (1.0 - p)

    def predict(self, docs: list[Document]) -> tuple[np.ndarray, np.ndarray]:
        """Eval-mode logits and binary predictions for a document list."""
        n = len(self.labels)
        logits = np.empty((len(docs), n))
        for i, doc in enumerate(docs):
            out, _ = self.forward(doc.token_ids, training=False)
            logits[i] = out.data
        return logits, (logits > 0).astype(np.int64)


def seeded_rngs(seed: int) -> dict:
    """Independent generators with a fixed spawn order, one per concern."""
    keys = ("init", "embeddings", "labels", "shuffle", "dropout")
    seqs = np.random.SeedSequence(seed).spawn(len(keys))
    return {k: np.random.default_rng(s) for k, s in zip(keys, seqs)}


def assemble(
    config: MagnetConfig,
    train_records: list[dict],
    embeddings_path=None,
) -> tuple[MagnetModel, list[Document]]:
    """Build vocabulary, label space, statistics, and a fresh model from
    training records; returns the model and the encoded training documents."""
    config.validate()
    rngs = seeded_rngs(config.seed)
    token_seqs = [tokenize(rec["text"])[: config.max_doc_tokens] for rec in train_records]
    vocab = build_vocab(token_seqs, config.vocab_max_size)
    labels = build_label_space(train_records)
    docs = make_documents(train_records, vocab, labels, config.max_doc_tokens)
    stats = build_cooccurrence(docs, labels)
    if embeddings_path is not None:
        table = load_embedding_file(embeddings_path, vocab, rngs["embeddings"])
        if table.dim != config.embedding_dim:
            raise ValueError(
                f"embedding file dim {table.dim} != configured embedding_dim {config.embedding_dim}"
            )
    else:
        table = random_table(vocab, config.embedding_dim, rngs["embeddings"])
    label_matrix = build_label_matrix(labels, table, rngs["labels"]).matrix
    model = MagnetModel.build(
        config, vocab, labels, table, label_matrix, stats, rngs["init"], rngs
    )
    return model, docs
