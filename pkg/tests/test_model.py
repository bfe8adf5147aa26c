"""Model assembly and forward-pass tests, including the end-to-end gradient
check on a small configuration."""

import dataclasses

import numpy as np
import pytest

from conftest import check_grads

from magnet import diffcore as dc
from magnet.corpus import target_vector
from magnet.model import MagnetConfig, assemble, bce_loss, predict_logits
from magnet.toydata import keyword_corpus
from magnet.trainer import init_adam, train_step


TOY = MagnetConfig(
    vocab_max_size=50,
    embedding_dim=8,
    hidden_size=5,
    heads=2,
    dropout=0.0,
    adjacency_init="cooccurrence",
    seed=3,
)


def _toy_model(config=TOY, n_docs=8):
    records = keyword_corpus(n_docs, seed=1)
    return assemble(config, records)


# -- config ---------------------------------------------------------------------


def test_config_default_dims_chain_to_twice_hidden():
    cfg = MagnetConfig(embedding_dim=12, hidden_size=7)
    assert cfg.layer_dims() == (12, 12, 14)
    cfg.validate()


def test_config_rejects_bad_final_dim():
    cfg = MagnetConfig(embedding_dim=8, hidden_size=4, gat_dims=(6, 9))
    with pytest.raises(ValueError, match="must equal encoder output"):
        cfg.validate()


def test_config_rejects_bad_dropout_and_heads():
    with pytest.raises(ValueError, match="dropout"):
        MagnetConfig(dropout=1.0).validate()
    with pytest.raises(ValueError, match="heads"):
        MagnetConfig(heads=0).validate()


def test_config_roundtrips_through_dict():
    cfg = MagnetConfig(gat_dims=(8, 10), hidden_size=5, embedding_dim=8)
    again = MagnetConfig.from_dict(cfg.to_dict())
    assert again == cfg


# -- prediction scores ------------------------------------------------------------


def test_predict_logits_zero_label_features():
    f = dc.tensor(np.ones(6))
    h = dc.tensor(np.zeros((4, 6)))
    np.testing.assert_array_equal(predict_logits(f, h).data, np.zeros(4))


def test_predict_logits_basis_row_reads_coordinate():
    f = dc.tensor(np.array([3.0, -1.0, 2.0]))
    h = np.zeros((2, 3))
    h[0, 0] = 1.0  # basis row picks out the first coordinate
    out = predict_logits(f, dc.tensor(h)).data
    assert out[0] == 3.0 and out[1] == 0.0


def test_predict_logits_matches_per_label_loop(rng):
    f = rng.standard_normal(7)
    h = rng.standard_normal((5, 7))
    got = predict_logits(dc.tensor(f), dc.tensor(h)).data
    want = np.array([float(h[i] @ f) for i in range(5)])
    np.testing.assert_allclose(got, want, atol=1e-12)


def test_predict_logits_dim_mismatch():
    with pytest.raises(dc.ShapeMismatchError, match="predict"):
        predict_logits(dc.tensor(np.ones(4)), dc.tensor(np.ones((3, 5))))


def test_bce_loss_zero_logits_value():
    y = np.array([1.0, 0.0, 1.0])
    loss = bce_loss(dc.tensor(np.zeros(3)), y)
    np.testing.assert_allclose(loss.item(), 3 * np.log(2.0), rtol=1e-12)


# -- forward ----------------------------------------------------------------------


def test_eval_forward_is_deterministic():
    model, docs = _toy_model()
    a, _ = model.forward(docs[0].token_ids, training=False)
    b, _ = model.forward(docs[0].token_ids, training=False)
    assert np.array_equal(a.data, b.data)


def test_training_with_zero_dropout_equals_eval():
    model, docs = _toy_model()
    a, _ = model.forward(docs[0].token_ids, training=True)
    b, _ = model.forward(docs[0].token_ids, training=False)
    assert np.array_equal(a.data, b.data)


def test_dropout_changes_training_forward_only():
    cfg = dataclasses.replace(TOY, dropout=0.5)
    model, docs = _toy_model(cfg)
    t1, _ = model.forward(docs[0].token_ids, training=True)
    t2, _ = model.forward(docs[0].token_ids, training=True)
    assert not np.array_equal(t1.data, t2.data)  # fresh masks per call
    e1, _ = model.forward(docs[0].token_ids, training=False)
    e2, _ = model.forward(docs[0].token_ids, training=False)
    assert np.array_equal(e1.data, e2.data)


def test_forward_loss_matches_direct_bce():
    model, docs = _toy_model()
    y = target_vector(docs[0], len(model.labels))
    logits, loss = model.forward(docs[0].token_ids, targets=y)
    direct = bce_loss(dc.tensor(logits.data), y)
    assert loss.item() == pytest.approx(direct.item(), rel=1e-12)
    assert loss.item() >= 0.0


def test_threshold_invariant_to_monotone_transform():
    model, docs = _toy_model()
    logits, _ = model.predict(docs)
    preds = (logits > 0).astype(int)
    squashed = np.tanh(logits * 0.37)  # strictly increasing, sign preserving
    np.testing.assert_array_equal((squashed > 0).astype(int), preds)


def test_single_small_step_decreases_loss():
    model, docs = _toy_model()
    doc = docs[0]
    y = target_vector(doc, len(model.labels))
    _, before = model.forward(doc.token_ids, targets=y)
    state = init_adam(model.parameters(), lr=1e-4)
    train_step(model, [doc], state)
    _, after = model.forward(doc.token_ids, targets=y)
    assert after.item() <= before.item() + 1e-12


@pytest.mark.parametrize("layer_mode", ["gat", "gcn"])
def test_end_to_end_gradients_match_fd(layer_mode):
    # xavier adjacency keeps the attention support dense: entries that are
    # exactly zero sit on the (non-differentiable) support boundary
    cfg = MagnetConfig(
        vocab_max_size=20,
        embedding_dim=4,
        hidden_size=3,
        gat_dims=(5, 6),
        heads=2,
        dropout=0.0,
        adjacency_init="xavier",
        layer_mode=layer_mode,
        seed=11,
    )
    records = [
        {"text": "rain storm goal", "labels": ["weather", "sports"]},
        {"text": "stocks profit flight", "labels": ["finance", "travel"]},
        {"text": "rain stocks", "labels": ["weather", "finance"]},
    ]
    model, docs = assemble(cfg, records)
    n = len(model.labels)
    targets = [target_vector(d, n) for d in docs]

    def build():
        total = None
        for doc, y in zip(docs, targets):
            _, loss = model.forward(doc.token_ids, targets=y)
            total = loss if total is None else dc.add(total, loss)
        return dc.mul(total, 1.0 / len(docs))

    check_grads(build, model.parameters(), tol=1e-4)


def test_assemble_rejects_dim_mismatch_with_embedding_file(tmp_path):
    p = tmp_path / "vec.txt"
    p.write_text("1 3\nrain 1 2 3\n")
    cfg = dataclasses.replace(TOY, embedding_dim=8)
    with pytest.raises(ValueError, match="dim"):
        assemble(cfg, keyword_corpus(8, seed=1), embeddings_path=p)


def test_state_roundtrip_preserves_predictions():
    model, docs = _toy_model()
    logits1, _ = model.predict(docs)
    state = {k: v.copy() for k, v in model.state_arrays().items()}
    model2, _ = _toy_model()
    model2.load_state(state)
    logits2, _ = model2.predict(docs)
    assert np.array_equal(logits1, logits2)


def test_load_state_unknown_name_rejected():
    model, _ = _toy_model()
    with pytest.raises(KeyError, match="mystery"):
        model.load_state({"mystery": np.zeros(3)})


def test_load_state_shape_mismatch_rejected():
    model, _ = _toy_model()
    with pytest.raises(ValueError, match="shape"):
        model.load_state({"adjacency": np.zeros((2, 2))})
