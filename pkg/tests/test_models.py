from collections import Counter

import numpy as np
import pytest

import metaphor.autodiff as ad
from metaphor.data import EmbeddingStore, Example
from metaphor.errors import ConfigError, DomainError
from metaphor.harness import example_loss
from metaphor.models import (LexicalBaseline, ModelConfig, SequenceLabeler,
                             TargetClassifier, argmax_label, baseline_fit,
                             baseline_predict, build_model, load_checkpoint,
                             save_checkpoint, seq_extract_verb_label,
                             zero_parameters)
from metaphor.seeding import rng_for

LN2 = 0.6931471805599453


def small_store(rng=None, n_words=12):
    rng = rng or rng_for(0, "store")
    vecs = {f"w{i}": rng.normal(size=4) for i in range(n_words)}
    return EmbeddingStore(word_vectors=vecs, contextual={},
                          contextual_enabled=True, word_dim=4, contextual_dim=2)


def small_config(**kw):
    base = dict(word_dim=4, contextual_dim=2, index_dim=3, hidden_dim=5,
                ff_hidden_dim=4, dropout_input=0.3, dropout_ff=0.3)
    base.update(kw)
    return ModelConfig(**base)


def sent(id="x", n=4, target=None, labels=None):
    tokens = [f"w{i}" for i in range(n)]
    labels = labels if labels is not None else [i % 2 for i in range(n)]
    return Example(id=id, tokens=tokens, labels=labels, pos=None, genre=None,
                   target_index=target)


def test_seq_forward_shapes():
    model = SequenceLabeler(small_store(), small_config(), rng_for(1, "init"))
    out = model.forward(sent(n=6))
    assert len(out) == 6
    assert all(t.shape == (2,) for t in out)
    assert model.predict_labels(sent(n=6)) == [argmax_label(t) for t in out]


def test_cls_forward_shape_and_target_requirement():
    model = TargetClassifier(small_store(), small_config(), rng_for(2, "init"))
    out = model.forward(sent(n=5, target=2))
    assert out.shape == (2,)
    with pytest.raises(DomainError):
        model.forward(sent(n=5))


def test_cls_target_marker_changes_prediction_input():
    store = small_store()
    model = TargetClassifier(store, small_config(), rng_for(3, "init"))
    a = model.forward(sent(n=5, target=1)).data
    b = model.forward(sent(n=5, target=3)).data
    # same tokens, different marked verb, different logits
    assert not np.allclose(a, b)


def test_argmax_tie_goes_literal():
    assert argmax_label(ad.constant([0.5, 0.5])) == 0
    assert argmax_label(ad.constant([0.1, 0.3])) == 1
    assert argmax_label(ad.constant([0.3, 0.1])) == 0


def test_seq_extract_verb_label():
    preds = [ad.constant([0.0, 1.0]), ad.constant([1.0, 0.0])]
    assert seq_extract_verb_label(preds, 0) == 1
    assert seq_extract_verb_label(preds, 1) == 0
    with pytest.raises(DomainError):
        seq_extract_verb_label(preds, 2)
    with pytest.raises(DomainError):
        seq_extract_verb_label(preds, None)


def test_store_config_mismatch_rejected():
    store = small_store()
    with pytest.raises(ConfigError):
        SequenceLabeler(store, small_config(word_dim=8), rng_for(0))
    with pytest.raises(ConfigError):
        TargetClassifier(store, small_config(contextual_dim=7), rng_for(0))


def test_build_model_dispatch():
    store = small_store()
    assert build_model("seq", store, small_config(), rng_for(0)).task == "seq"
    assert build_model("cls", store, small_config(), rng_for(0)).task == "cls"
    with pytest.raises(ConfigError):
        build_model("tagger", store, small_config(), rng_for(0))


def test_eval_mode_deterministic_train_mode_stochastic():
    model = SequenceLabeler(small_store(), small_config(), rng_for(4, "init"))
    e = sent(n=5)
    a = [t.data.copy() for t in model.forward(e)]
    b = [t.data.copy() for t in model.forward(e)]
    assert all(np.array_equal(x, y) for x, y in zip(a, b))
    rng = rng_for(5, "drop")
    c = [t.data.copy() for t in model.forward(e, "train", rng)]
    d = [t.data.copy() for t in model.forward(e, "train", rng)]
    assert not all(np.array_equal(x, y) for x, y in zip(c, d))


def test_zeroed_model_is_maximally_uncertain():
    for task, target in (("seq", None), ("cls", 1)):
        model = build_model(task, small_store(), small_config(), rng_for(6, "init"))
        zero_parameters(model)
        e = sent(n=4, target=target)
        loss = example_loss(model, e, mode="eval")
        assert loss.item() == pytest.approx(LN2, abs=1e-9)


def test_cls_parameters_include_marker_table():
    model = TargetClassifier(small_store(), small_config(), rng_for(7, "init"))
    names = model.param_dict()
    assert "index_embedding.table" in names
    assert names["index_embedding.table"].shape == (2, 3)
    assert len(model.parameters()) == len(names)
    # every parameter is reachable from the loss
    e = sent(n=4, target=2)
    ad.zero_grads(model.parameters())
    ad.backward(example_loss(model, e, mode="eval"))
    for name, p in names.items():
        assert np.any(p.grad != 0.0), f"{name} got no gradient"


# ---------------------------------------------------------------------------
# checkpoints


def test_checkpoint_round_trip(tmp_path):
    store = small_store()
    model = TargetClassifier(store, small_config(), rng_for(8, "init"))
    path = str(tmp_path / "m.json")
    save_checkpoint(model, path)
    back = load_checkpoint(path, store)
    assert isinstance(back, TargetClassifier)
    for name, p in model.param_dict().items():
        assert np.array_equal(p.data, back.param_dict()[name].data), name
    # and predictions agree
    e = sent(n=5, target=1)
    assert np.allclose(model.forward(e).data, back.forward(e).data)


def test_checkpoint_resave_is_byte_identical(tmp_path):
    store = small_store()
    model = SequenceLabeler(store, small_config(), rng_for(9, "init"))
    p1 = tmp_path / "a.json"
    p2 = tmp_path / "b.json"
    save_checkpoint(model, str(p1))
    save_checkpoint(load_checkpoint(str(p1), store), str(p2))
    assert p1.read_bytes() == p2.read_bytes()


def test_checkpoint_errors(tmp_path):
    store = small_store()
    model = SequenceLabeler(store, small_config(), rng_for(10, "init"))
    path = tmp_path / "m.json"
    save_checkpoint(model, str(path))

    other = EmbeddingStore(word_vectors={}, contextual={}, contextual_enabled=True,
                           word_dim=9, contextual_dim=2)
    with pytest.raises(ConfigError):
        load_checkpoint(str(path), other)

    path.write_text('{"format": "something-else"}')
    with pytest.raises(ConfigError):
        load_checkpoint(str(path), store)

    save_checkpoint(model, str(path))
    import json
    payload = json.loads(path.read_text())
    payload["version"] = 999
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError):
        load_checkpoint(str(path), store)

    payload["version"] = 1
    del payload["params"]["ff.b1"]
    path.write_text(json.dumps(payload))
    with pytest.raises(ConfigError) as ei:
        load_checkpoint(str(path), store)
    assert "ff.b1" in str(ei.value)


# ---------------------------------------------------------------------------
# lexical baseline


def random_corpus(rng, n_sentences=40, vocab=15):
    out = []
    for i in range(n_sentences):
        n = int(rng.integers(1, 8))
        tokens = [f"t{int(rng.integers(0, vocab))}" for _ in range(n)]
        labels = [int(rng.integers(0, 2)) for _ in range(n)]
        out.append(Example(id=f"r{i}", tokens=tokens, labels=labels, pos=None,
                           genre=None, target_index=0))
    return out


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_baseline_matches_counting_oracle(seed):
    rng = np.random.default_rng(seed)
    corpus = random_corpus(rng)
    model = baseline_fit(corpus, task="seq")

    oracle = Counter()
    for e in corpus:
        for tok, lab in zip(e.tokens, e.labels):
            oracle[(tok.lower(), lab)] += 1
    for e in corpus:
        for tok in e.tokens + ["never-seen", "T0"]:
            want = int(oracle[(tok.lower(), 1)] > oracle[(tok.lower(), 0)])
            assert baseline_predict(model, tok) == want


def test_baseline_order_invariance():
    rng = np.random.default_rng(42)
    corpus = random_corpus(rng)
    a = baseline_fit(corpus, task="seq")
    b = baseline_fit(list(reversed(corpus)), task="seq")
    for e in corpus:
        assert a.predict_labels(e) == b.predict_labels(e)


def test_baseline_tie_and_unseen_are_literal():
    e1 = Example(id="1", tokens=["spark"], labels=[1], pos=None, genre=None, target_index=0)
    e2 = Example(id="2", tokens=["spark"], labels=[0], pos=None, genre=None, target_index=0)
    model = baseline_fit([e1, e2], task="seq")
    assert model.predict_token("spark") == 0   # 1 vs 1 tie
    assert model.predict_token("ember") == 0   # unseen


def test_baseline_case_folding():
    e1 = Example(id="1", tokens=["Devour"], labels=[1], pos=None, genre=None, target_index=0)
    e2 = Example(id="2", tokens=["devour"], labels=[1], pos=None, genre=None, target_index=0)
    model = baseline_fit([e1, e2], task="seq")
    assert model.counts["devour"] == [2, 0]
    assert model.predict_token("DEVOUR") == 1


def test_baseline_cls_counts_only_targets():
    e = Example(id="1", tokens=["the", "fire", "spread"], labels=[0, 1, 1],
                pos=None, genre=None, target_index=2)
    model = baseline_fit([e], task="cls")
    assert "spread" in model.counts and "fire" not in model.counts
    assert model.predict_target(e) == 1
    with pytest.raises(ConfigError):
        baseline_fit([e], task="tokens")
    with pytest.raises(DomainError):
        baseline_fit([Example(id="2", tokens=["a"], labels=None, pos=None,
                              genre=None, target_index=0)], task="seq")
