"""Word-vector loading and label embedding construction.

The on-disk format is the classic text one: a header line "count dim", then
one line per token with the token followed by dim reals, space separated,
UTF-8 with LF endings. Vocabulary tokens missing from the file get a seeded
uniform(-0.05, 0.05) row, so a run is reproducible given its seed.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from .corpus import LabelSpace, Vocabulary

log = logging.getLogger("magnet.embeddings")

RANDOM_ROW_SCALE = 0.05


def _random_row(rng: np.random.Generator, dim: int) -> np.ndarray:
    return rng.uniform(-RANDOM_ROW_SCALE, RANDOM_ROW_SCALE, dim)


@dataclass
class EmbeddingTable:
    vocab: Vocabulary
    vectors: np.ndarray  # |V| x dim, aligned to vocabulary indices
    trainable: bool
    coverage: float  # fraction of vocab tokens found in the source file

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def lookup(self, token: str) -> np.ndarray | None:
        if token in self.vocab:
            return self.vectors[self.vocab.index(token)]
        return None


def parse_embedding_file(path) -> tuple[dict[str, np.ndarray], int]:
    """Raw token -> vector map from a word-vector text file."""
    with open(path, encoding="utf-8") as fh:
        header = fh.readline()
        parts = header.split()
        if len(parts) != 2:
            raise ValueError(f"{path}:1: malformed header {header.strip()!r}, expected 'count dim'")
        try:
            count, dim = int(parts[0]), int(parts[1])
        except ValueError:
            raise ValueError(f"{path}:1: malformed header {header.strip()!r}") from None
        if count < 0 or dim < 1:
            raise ValueError(f"{path}:1: malformed header {header.strip()!r}")
        vectors: dict[str, np.ndarray] = {}
        for lineno, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            fields = line.rstrip("\n").split(" ")
            if len(fields) != dim + 1:
                raise ValueError(
                    f"{path}:{lineno}: expected {dim} values after the token, got {len(fields) - 1}"
                )
            token = fields[0]
            try:
                vec = np.array([float(v) for v in fields[1:]])
            except ValueError:
                raise ValueError(f"{path}:{lineno}: non-numeric vector component") from None
            if token in vectors:
                log.warning("%s:%d: duplicate token %r, last occurrence wins", path, lineno, token)
            vectors[token] = vec
    if count != len(vectors):
        log.warning("%s: header says %d rows, file has %d", path, count, len(vectors))
    return vectors, dim


def load_embedding_file(
    path, vocab: Vocabulary, rng: np.random.Generator, trainable: bool = True
) -> EmbeddingTable:
    """Table aligned to the vocabulary; missing tokens get seeded random rows."""
    vectors, dim = parse_embedding_file(path)
    table = np.empty((len(vocab), dim))
    found = 0
    for i, token in enumerate(vocab.index_to_token):
        vec = vectors.get(token)
        if vec is None:
            table[i] = _random_row(rng, dim)
        else:
            table[i] = vec
            found += 1
    coverage = found / len(vocab)
    log.info("embedding coverage: %d/%d tokens (%.1f%%)", found, len(vocab), 100 * coverage)
    return EmbeddingTable(vocab, table, trainable, coverage)


def random_table(
    vocab: Vocabulary, dim: int, rng: np.random.Generator, trainable: bool = True
) -> EmbeddingTable:
    """All-random table for runs without a pretrained vector file."""
    return EmbeddingTable(vocab, rng.uniform(-RANDOM_ROW_SCALE, RANDOM_ROW_SCALE, (len(vocab), dim)), trainable, 0.0)


@dataclass
class LabelEmbeddingMatrix:
    matrix: np.ndarray  # n x dim, row i is the embedding of label i's name

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])


def build_label_matrix(
    labels: LabelSpace, table: EmbeddingTable, rng: np.random.Generator
) -> LabelEmbeddingMatrix:
    """Label rows from name-word vectors; multi-word names take the unweighted mean.

    Name words missing from the table draw a fresh seeded random row each, so
    distinct out-of-vocabulary labels stay distinguishable.
    """
    rows = np.empty((len(labels), table.dim))
    for i, name in enumerate(labels.names):
        words = name.lower().split()
        parts = []
        for word in words:
            vec = table.lookup(word)
            parts.append(vec if vec is not None else _random_row(rng, table.dim))
        rows[i] = np.mean(parts, axis=0)
    return LabelEmbeddingMatrix(rows)
