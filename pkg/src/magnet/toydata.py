"""Synthetic keyword-rule corpora for demos, tests, and the ablation harness.

Texts are bags of label keywords plus filler words; a document carries a
label exactly when one of that label's keywords was planted. Generation is
deterministic given the seed. Run as a module to write a corpus pair:

    python -m magnet.toydata out_dir [--seed N]
"""

from __future__ import annotations

import json
from pathlib import Path

import numpy as np

LABEL_KEYWORDS = {
    "weather": ["rain", "storm", "cloud"],
    "sports": ["goal", "league", "match"],
    "finance": ["stocks", "profit", "market"],
    "travel": ["flight", "hotel", "visa"],
    "music": ["guitar", "concert", "melody"],
}

FILLERS = [
    "the", "a", "of", "today", "report", "daily", "update", "note",
    "brief", "review", "latest", "summary", "item", "desk", "wire",
]


def write_jsonl(records, path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8") as fh:
        for rec in records:
            fh.write(json.dumps({"text": rec["text"], "labels": rec["labels"]}) + "\n")


def _compose(rng: np.random.Generator, keywords: list[str]) -> str:
    words = list(keywords)
    n_fill = int(rng.integers(2, 5))
    words += [FILLERS[int(rng.integers(len(FILLERS)))] for _ in range(n_fill)]
    rng.shuffle(words)
    return " ".join(words)


def keyword_corpus(n_docs: int = 64, seed: int = 0) -> list[dict]:
    """Five labels; "weather" and "sports" always co-occur (a 100% pair)."""
    rng = np.random.default_rng(seed)
    names = list(LABEL_KEYWORDS)
    paired = names[:2]
    singles = names[2:]
    records = []
    for i in range(n_docs):
        if i % 2 == 0:
            labels = list(paired)
            if rng.random() < 0.3:
                labels.append(singles[int(rng.integers(len(singles)))])
        else:
            k = 1 + int(rng.integers(2))
            labels = list(rng.choice(singles, size=k, replace=False))
        keywords = []
        for name in labels:
            opts = LABEL_KEYWORDS[name]
            keywords.append(opts[int(rng.integers(len(opts)))])
        records.append({"text": _compose(rng, keywords), "labels": sorted(labels)})
    return records


def correlation_corpus(
    n_train: int = 96,
    n_test: int = 64,
    seed: int = 0,
    anchor_period: int = 8,
    test_anchor_period: int | None = None,
    train_beacon_keyword_rate: float = 0.5,
) -> tuple[list[dict], list[dict]]:
    """Corpus where the rare label "beacon" appears only when "anchor" does.

    One document in `anchor_period` is an anchor document (anchor keyword
    always present); five of six of those also carry the beacon label. The
    beacon keyword marks only a fraction of training beacon documents and is
    removed from every other beacon document in the test split, so beacon
    recall there requires exploiting the anchor correlation rather than the
    beacon keyword alone. The remaining documents spread over three filler
    labels with reliable keywords.
    """
    rng = np.random.default_rng(seed)
    kw = {
        "anchor": "harbor",
        "beacon": "signal",
        "canyon": "ridge",
        "drift": "tide",
        "ember": "torch",
    }
    fillers = ["canyon", "drift", "ember"]

    def make(n: int, period: int, alternate_beacon_keyword: bool) -> list[dict]:
        records = []
        beacon_toggle = True
        anchor_count = 0
        for i in range(n):
            if i % period == 0:
                anchor_count += 1
                labels = ["anchor"]
                keywords = [kw["anchor"]]
                if anchor_count % 6 != 0:  # five of six anchor docs carry beacon
                    labels.append("beacon")
                    if alternate_beacon_keyword:
                        has_kw = beacon_toggle
                        beacon_toggle = not beacon_toggle
                    else:
                        has_kw = rng.random() < train_beacon_keyword_rate
                    if has_kw:
                        keywords.append(kw["beacon"])
            else:
                # fillers never co-occur: the anchor/beacon pair is the only
                # correlated structure in the corpus
                labels = [fillers[i % 3]]
                keywords = [kw[labels[0]]]
            records.append({"text": _compose(rng, keywords), "labels": sorted(labels)})
        return records

    train = make(n_train, anchor_period, alternate_beacon_keyword=False)
    test = make(n_test, test_anchor_period or anchor_period, alternate_beacon_keyword=True)
    return train, test


def main(argv=None) -> int:
    import argparse

    ap = argparse.ArgumentParser(description="write synthetic keyword corpora")
    ap.add_argument("out_dir")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--docs", type=int, default=64)
    args = ap.parse_args(argv)
    out = Path(args.out_dir)
    records = keyword_corpus(args.docs, args.seed)
    write_jsonl(records, out / "train.jsonl")
    write_jsonl(keyword_corpus(max(16, args.docs // 4), args.seed + 1), out / "test.jsonl")
    print(f"wrote {out / 'train.jsonl'} and {out / 'test.jsonl'}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
