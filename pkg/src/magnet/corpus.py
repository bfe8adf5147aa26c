"""Corpus ingestion: record parsing, tokenization, vocabulary and label space
construction, and label co-occurrence statistics.

Dataset files are UTF-8 JSON lines; every record is an object with "text"
(string) and "labels" (non-empty array of strings). The label space is built
from the training split only, so every retained label has frequency >= 1.
"""

from __future__ import annotations

import json
import logging
import unicodedata
from collections import Counter
from dataclasses import dataclass, field

import numpy as np

log = logging.getLogger("magnet.corpus")

UNK_TOKEN = "<unk>"


def tokenize(text: str) -> list[str]:
    """Lowercase, split on whitespace, and split punctuation into own tokens."""
    tokens: list[str] = []
    word: list[str] = []
    for ch in text.lower():
        if ch.isspace():
            if word:
                tokens.append("".join(word))
                word = []
        elif unicodedata.category(ch).startswith("P"):
            if word:
                tokens.append("".join(word))
                word = []
            tokens.append(ch)
        else:
            word.append(ch)
    if word:
        tokens.append("".join(word))
    return tokens


@dataclass
class Vocabulary:
    token_to_index: dict[str, int]
    index_to_token: list[str]
    max_size: int

    unk_index = 0

    @classmethod
    def from_tokens(cls, tokens: list[str], max_size: int | None = None) -> "Vocabulary":
        """Rebuild from an ordered token list whose first entry is the unknown token."""
        if not tokens or tokens[0] != UNK_TOKEN:
            raise ValueError("vocabulary token list must start with the unknown token")
        return cls({t: i for i, t in enumerate(tokens)}, list(tokens), max_size or len(tokens))

    def __len__(self) -> int:
        return len(self.index_to_token)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_index

    def index(self, token: str) -> int:
        return self.token_to_index.get(token, self.unk_index)


def build_vocab(token_seqs, max_size: int) -> Vocabulary:
    """Frequency-ranked vocabulary; ties break lexicographically; slot 0 is unk."""
    if max_size < 2:
        raise ValueError(f"vocab max_size must be >= 2, got {max_size}")
    counts: Counter[str] = Counter()
    n_seqs = 0
    for seq in token_seqs:
        n_seqs += 1
        counts.update(seq)
    if n_seqs == 0:
        raise ValueError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = [token for token, _ in ranked[: max_size - 1]]
    index_to_token = [UNK_TOKEN] + kept
    return Vocabulary({t: i for i, t in enumerate(index_to_token)}, index_to_token, max_size)


def encode(text: str, vocab: Vocabulary) -> list[int]:
    tokens = tokenize(text)
    if not tokens:
        raise ValueError("encode: text produced an empty token sequence")
    return [vocab.index(t) for t in tokens]


@dataclass
class LabelSpace:
    name_to_index: dict[str, int]
    names: list[str]

    @classmethod
    def from_names(cls, names) -> "LabelSpace":
        names = list(names)
        if len(names) != len(set(names)):
            raise ValueError("label names must be unique")
        if len(names) < 2:
            raise ValueError(f"need at least 2 labels, got {len(names)}")
        return cls({n: i for i, n in enumerate(names)}, names)

    def __len__(self) -> int:
        return len(self.names)


def build_label_space(records) -> LabelSpace:
    """Label space over the training records, name-sorted for determinism."""
    seen = sorted({name for rec in records for name in rec["labels"]})
    return LabelSpace.from_names(seen)


@dataclass
class Document:
    text: str
    token_ids: list[int]
    label_ids: tuple[int, ...]  # sorted, duplicate-free


def load_records(path, require_labels: bool = True) -> list[dict]:
    """Parse a JSON-lines dataset file; blank lines are skipped."""
    records = []
    with open(path, encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                obj = json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON ({exc.msg})") from None
            if not isinstance(obj, dict) or not isinstance(obj.get("text"), str):
                raise ValueError(f'{path}:{lineno}: record must be an object with a "text" string')
            labels = obj.get("labels", [])
            if require_labels:
                if (
                    not isinstance(labels, list)
                    or not labels
                    or not all(isinstance(x, str) for x in labels)
                ):
                    raise ValueError(
                        f'{path}:{lineno}: record must carry a non-empty "labels" array of strings'
                    )
            records.append({"text": obj["text"], "labels": list(labels), "line": lineno})
    if not records:
        raise ValueError(f"{path}: no records found")
    return records


def make_documents(
    records,
    vocab: Vocabulary,
    labels: LabelSpace,
    max_tokens: int = 400,
    require_labels: bool = True,
) -> list[Document]:
    """Encode records into Documents; rejects empty texts and unknown labels."""
    docs = []
    for i, rec in enumerate(records):
        tokens = tokenize(rec["text"])[:max_tokens]
        if not tokens:
            where = f"line {rec['line']}" if "line" in rec else f"record {i}"
            raise ValueError(f"empty document after tokenization ({where})")
        ids = [vocab.index(t) for t in tokens]
        label_ids = []
        for name in rec.get("labels", []):
            if name not in labels.name_to_index:
                raise KeyError(f"label {name!r} not present in the label space")
            label_ids.append(labels.name_to_index[name])
        if require_labels and not label_ids:
            where = f"line {rec['line']}" if "line" in rec else f"record {i}"
            raise ValueError(f"document without labels ({where})")
        docs.append(Document(rec["text"], ids, tuple(sorted(set(label_ids)))))
    return docs


@dataclass
class CooccurrenceStats:
    counts: np.ndarray  # n x n, counts[i][j] = docs containing both i and j
    freq: np.ndarray  # per-label document frequency

    @property
    def n(self) -> int:
        return int(self.freq.shape[0])


def build_cooccurrence(docs, labels: LabelSpace) -> CooccurrenceStats:
    n = len(labels)
    counts = np.zeros((n, n), dtype=np.int64)
    for doc in docs:
        ids = doc.label_ids
        for a in ids:
            for b in ids:
                counts[a, b] += 1
    freq = np.diag(counts).copy()
    if (freq == 0).any():
        missing = [labels.names[i] for i in np.flatnonzero(freq == 0)]
        raise ValueError(f"labels with zero document frequency: {missing}")
    return CooccurrenceStats(counts, freq)


def target_vector(doc: Document, n_labels: int) -> np.ndarray:
    y = np.zeros(n_labels)
    y[list(doc.label_ids)] = 1.0
    return y
