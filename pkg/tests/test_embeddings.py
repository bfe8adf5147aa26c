import logging

import numpy as np
import pytest

from magnet.corpus import LabelSpace, build_vocab, tokenize
from magnet.embeddings import (
    EmbeddingTable,
    build_label_matrix,
    load_embedding_file,
    parse_embedding_file,
    random_table,
)


def _vocab(*texts, max_size=50):
    return build_vocab([tokenize(t) for t in texts], max_size)


def _write(tmp_path, content, name="vectors.txt"):
    p = tmp_path / name
    p.write_text(content, encoding="utf-8")
    return p


def test_parse_basic_file(tmp_path):
    p = _write(tmp_path, "2 3\na 1 2 3\nb 4 5 6\n")
    vectors, dim = parse_embedding_file(p)
    assert dim == 3
    np.testing.assert_array_equal(vectors["a"], [1, 2, 3])
    np.testing.assert_array_equal(vectors["b"], [4, 5, 6])


def test_loaded_table_aligns_to_vocab(tmp_path):
    p = _write(tmp_path, "2 3\na 1 2 3\nb 4 5 6\n")
    vocab = _vocab("a b a")
    table = load_embedding_file(p, vocab, np.random.default_rng(0))
    np.testing.assert_array_equal(table.vectors[vocab.index("a")], [1, 2, 3])
    np.testing.assert_array_equal(table.vectors[vocab.index("b")], [4, 5, 6])
    unk_row = table.vectors[vocab.unk_index]
    assert np.all(np.abs(unk_row) < 0.05) and not np.all(unk_row == 0)


def test_missing_token_gets_seeded_random_row(tmp_path):
    p = _write(tmp_path, "1 2\na 9 9\n")
    vocab = _vocab("a zebra")
    t1 = load_embedding_file(p, vocab, np.random.default_rng(7))
    t2 = load_embedding_file(p, vocab, np.random.default_rng(7))
    row = t1.vectors[vocab.index("zebra")]
    assert np.all(np.abs(row) < 0.05)
    assert np.array_equal(t1.vectors, t2.vectors)  # bit-identical reload
    assert t1.coverage == pytest.approx(1 / 3)


def test_dim_mismatch_names_line(tmp_path):
    p = _write(tmp_path, "2 3\na 1 2 3\nb 4 5 6 7\n")
    with pytest.raises(ValueError, match=":3"):
        parse_embedding_file(p)


def test_malformed_header(tmp_path):
    p = _write(tmp_path, "banana\na 1 2\n")
    with pytest.raises(ValueError, match="header"):
        parse_embedding_file(p)


def test_duplicate_token_last_wins_with_warning(tmp_path, caplog):
    p = _write(tmp_path, "2 2\na 1 1\na 2 2\n")
    with caplog.at_level(logging.WARNING, logger="magnet.embeddings"):
        vectors, _ = parse_embedding_file(p)
    np.testing.assert_array_equal(vectors["a"], [2, 2])
    assert any("duplicate" in r.message for r in caplog.records)


def test_label_matrix_single_word(tmp_path):
    p = _write(tmp_path, "2 2\nsports 1 2\nnews 3 4\n")
    vocab = _vocab("sports news")
    table = load_embedding_file(p, vocab, np.random.default_rng(0))
    labels = LabelSpace.from_names(["news", "sports"])
    m = build_label_matrix(labels, table, np.random.default_rng(1))
    np.testing.assert_array_equal(m.matrix[labels.name_to_index["sports"]], [1, 2])
    np.testing.assert_array_equal(m.matrix[labels.name_to_index["news"]], [3, 4])


def test_label_matrix_multi_word_mean(tmp_path):
    p = _write(tmp_path, "2 2\nmachine 1 3\nlearning 3 5\n")
    vocab = _vocab("machine learning stuff")
    table = load_embedding_file(p, vocab, np.random.default_rng(0))
    labels = LabelSpace.from_names(["machine learning", "stuff"])
    m = build_label_matrix(labels, table, np.random.default_rng(1))
    np.testing.assert_allclose(m.matrix[labels.name_to_index["machine learning"]], [2, 4])


def test_label_matrix_oov_words_deterministic():
    vocab = _vocab("unrelated corpus words")
    table = random_table(vocab, 4, np.random.default_rng(3))
    labels = LabelSpace.from_names(["nebula", "quasar"])
    m1 = build_label_matrix(labels, table, np.random.default_rng(5))
    m2 = build_label_matrix(labels, table, np.random.default_rng(5))
    assert np.array_equal(m1.matrix, m2.matrix)
    assert not np.array_equal(m1.matrix[0], m1.matrix[1])  # distinct rows
    assert m1.dim == 4


def test_random_table_shape_and_range():
    vocab = _vocab("one two three")
    table = random_table(vocab, 8, np.random.default_rng(0))
    assert table.vectors.shape == (len(vocab), 8)
    assert np.all(np.abs(table.vectors) < 0.05)
    assert np.all(np.isfinite(table.vectors))
