import json

import numpy as np
import pytest

from metaphor.data import (EmbeddingStore, Example, build_input_vector,
                           build_input_vectors, dev_split, example_label,
                           load_classification_csv, load_contextual,
                           load_dataset, load_sequence_jsonl,
                           load_word_vectors, make_folds,
                           write_classification_csv, write_sequence_jsonl)
from metaphor.errors import AlignmentError, DomainError, ParseError
from metaphor.layers import EmbeddingLayer


def ex(id="e1", tokens=None, labels=None, pos=None, genre=None, target=None):
    tokens = tokens if tokens is not None else ["a", "b", "c"]
    return Example(id=id, tokens=tokens, labels=labels, pos=pos, genre=genre,
                   target_index=target)


# ---------------------------------------------------------------------------
# Example


def test_validate_catches_misalignments():
    with pytest.raises(DomainError):
        ex(tokens=[]).validate()
    with pytest.raises(AlignmentError):
        ex(labels=[0, 1]).validate()
    with pytest.raises(DomainError):
        ex(labels=[0, 2, 0]).validate()
    with pytest.raises(AlignmentError):
        ex(pos=["N"]).validate()
    with pytest.raises(DomainError):
        ex(target=3).validate()
    ex(labels=[0, 1, 0], pos=["N", "V", "N"], target=1).validate()


def test_target_label_and_example_label():
    e = ex(labels=[0, 1, 0], target=1)
    assert e.target_label == 1
    assert example_label(e) == 1
    assert example_label(ex(labels=[0, 0, 0])) == 0
    assert example_label(ex(labels=[0, 1, 0])) == 1
    with pytest.raises(DomainError):
        ex(labels=[0, 1, 0]).target_label
    with pytest.raises(DomainError):
        example_label(ex())


# ---------------------------------------------------------------------------
# classification CSV


def test_classification_csv_round_trip(tmp_path):
    path = str(tmp_path / "d.csv")
    rows = [
        ex("m1", ["she", "devoured", "the", "book"], [0, 1, 0, 0],
           ["PRON", "VERB", "DET", "NOUN"], None, 1),
        ex("m2", ["he", "ate", "lunch"], [0, 0, 0], None, "news", 1),
    ]
    write_classification_csv(rows, path)
    back = load_classification_csv(path)
    assert [e.id for e in back] == ["m1", "m2"]
    assert back[0].tokens == ["she", "devoured", "the", "book"]
    assert back[0].labels == [0, 1, 0, 0]          # non-target tokens literal
    assert back[0].pos == ["PRON", "VERB", "DET", "NOUN"]
    assert back[0].genre is None
    assert back[1].genre == "news"
    assert back[1].target_index == 1


def test_classification_csv_errors(tmp_path):
    path = tmp_path / "bad.csv"

    path.write_text("id,genre,tokens\n1,,a b\n")
    with pytest.raises(ParseError) as ei:
        load_classification_csv(str(path))
    assert "pos" in str(ei.value) and ":1:" in str(ei.value)

    header = "id,genre,tokens,pos,verb_index,label\n"
    path.write_text(header + "1,,a b,,x,0\n")
    with pytest.raises(ParseError) as ei:
        load_classification_csv(str(path))
    assert "verb_index" in str(ei.value) and ":2:" in str(ei.value)

    path.write_text(header + "1,,a b,,0,1\n2,,a b,,5,1\n")
    with pytest.raises(ParseError) as ei:
        load_classification_csv(str(path))
    assert ":3:" in str(ei.value) and "out of range" in str(ei.value)

    path.write_text(header + "1,,a b,,0,2\n")
    with pytest.raises(ParseError):
        load_classification_csv(str(path))


def test_classification_csv_unlabeled(tmp_path):
    path = tmp_path / "u.csv"
    path.write_text("id,genre,tokens,pos,verb_index,label\n1,,a b,,1,\n")
    with pytest.raises(ParseError):
        load_classification_csv(str(path))
    got = load_classification_csv(str(path), allow_unlabeled=True)
    assert got[0].labels is None
    assert got[0].target_index == 1


# ---------------------------------------------------------------------------
# sequence JSONL


def test_sequence_jsonl_round_trip(tmp_path):
    path = str(tmp_path / "d.jsonl")
    rows = [
        ex("s1", ["the", "war", "on", "drugs"], [0, 1, 0, 0],
           ["DET", "NOUN", "ADP", "NOUN"], "news"),
        ex("s2", ["hello"], [0], None, None),
    ]
    write_sequence_jsonl(rows, path)
    back = load_sequence_jsonl(path)
    assert back[0].genre == "news" and back[0].labels == [0, 1, 0, 0]
    assert back[1].genre is None and back[1].pos is None
    # blank lines are fine
    with open(path, "a") as fh:
        fh.write("\n")
    assert len(load_sequence_jsonl(path)) == 2


def test_sequence_jsonl_errors(tmp_path):
    path = tmp_path / "bad.jsonl"

    path.write_text('{"id": "a", "tokens": ["x"], "labels": [0]}\nnot json\n')
    with pytest.raises(ParseError) as ei:
        load_sequence_jsonl(str(path))
    assert ":2:" in str(ei.value)

    path.write_text('{"tokens": ["x"], "labels": [0]}\n')
    with pytest.raises(ParseError) as ei:
        load_sequence_jsonl(str(path))
    assert "'id'" in str(ei.value)

    path.write_text('{"id": "a", "tokens": ["x"], "labels": [0], "genre": "blogs"}\n')
    with pytest.raises(ParseError) as ei:
        load_sequence_jsonl(str(path))
    assert "blogs" in str(ei.value)

    rec = '{"id": "a", "tokens": ["x"], "labels": [0]}\n'
    path.write_text(rec + rec)
    with pytest.raises(ParseError) as ei:
        load_sequence_jsonl(str(path))
    assert "duplicate" in str(ei.value)

    path.write_text('{"id": "a", "tokens": ["x", "y"], "labels": [0]}\n')
    with pytest.raises(ParseError) as ei:
        load_sequence_jsonl(str(path))
    assert ":1:" in str(ei.value)

    path.write_text('{"id": "a", "tokens": ["x"]}\n')
    with pytest.raises(ParseError):
        load_sequence_jsonl(str(path))
    got = load_sequence_jsonl(str(path), allow_unlabeled=True)
    assert got[0].labels is None


def test_load_dataset_dispatch(tmp_path):
    csv_path = str(tmp_path / "a.csv")
    write_classification_csv([ex("1", ["a"], [1], None, None, 0)], csv_path)
    jl_path = str(tmp_path / "a.jsonl")
    write_sequence_jsonl([ex("1", ["a"], [1])], jl_path)
    assert load_dataset(csv_path)[0].target_index == 0
    assert load_dataset(jl_path)[0].target_index is None
    (tmp_path / "a.txt").write_text("x")
    with pytest.raises(ParseError):
        load_dataset(str(tmp_path / "a.txt"))


# ---------------------------------------------------------------------------
# vectors


def test_word_vectors_basic(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("cat 1.0 2.0 3.0\ndog 4.0 5.0 6.0\ncat 9.0 9.0 9.0\n")
    table = load_word_vectors(str(path), dim=3)
    assert table["cat"].tolist() == [1.0, 2.0, 3.0]  # first wins
    assert table["dog"].tolist() == [4.0, 5.0, 6.0]


def test_word_vectors_malformed(tmp_path):
    path = tmp_path / "v.txt"
    path.write_text("cat 1.0 2.0 3.0\nshort 1.0\n")
    with pytest.raises(ParseError) as ei:
        load_word_vectors(str(path), dim=3)
    assert ":2:" in str(ei.value)
    with pytest.warns(UserWarning):
        table = load_word_vectors(str(path), dim=3, permissive=True)
    assert list(table) == ["cat"]

    path.write_text("cat 1.0 x 3.0\n")
    with pytest.raises(ParseError):
        load_word_vectors(str(path), dim=3)


def test_contextual_vectors(tmp_path):
    path = tmp_path / "c.jsonl"
    rec = {"id": "s1", "vectors": [[1.0, 2.0], [3.0, 4.0]]}
    path.write_text(json.dumps(rec) + "\n")
    got = load_contextual(str(path), dim=2)
    assert got["s1"].shape == (2, 2)
    assert got["s1"][1].tolist() == [3.0, 4.0]

    path.write_text(json.dumps(rec) + "\n" + json.dumps(rec) + "\n")
    with pytest.raises(ParseError) as ei:
        load_contextual(str(path), dim=2)
    assert "duplicate" in str(ei.value)

    path.write_text(json.dumps({"id": "s1", "vectors": [[1.0]]}) + "\n")
    with pytest.raises(ParseError) as ei:
        load_contextual(str(path), dim=2)
    assert "width 1" in str(ei.value)


# ---------------------------------------------------------------------------
# embedding store + model inputs


def make_store():
    return EmbeddingStore(
        word_vectors={"cat": np.array([1.0, 2.0]), "Dog": np.array([3.0, 4.0]),
                      "dog": np.array([5.0, 6.0])},
        contextual={"s1": np.array([[10.0], [20.0]])},
        contextual_enabled=True, word_dim=2, contextual_dim=1)


def test_store_lookup_policy():
    store = make_store()
    assert store.word_vector("cat").tolist() == [1.0, 2.0]
    assert store.word_vector("Dog").tolist() == [3.0, 4.0]   # exact beats lowercase
    assert store.word_vector("CAT").tolist() == [1.0, 2.0]   # falls back to lowercase
    assert store.word_vector("fish").tolist() == [0.0, 0.0]  # OOV -> zeros
    assert store.input_dim == 3


def test_store_contextual_rows():
    store = make_store()
    assert store.contextual_rows("s1", 2)[0].tolist() == [10.0]
    assert store.contextual_rows("missing", 3).tolist() == [[0.0]] * 3
    with pytest.raises(AlignmentError):
        store.contextual_rows("s1", 5)
    off = EmbeddingStore(word_vectors={}, contextual={"s1": np.ones((2, 1))},
                         contextual_enabled=False, word_dim=2, contextual_dim=1)
    assert off.contextual_rows("s1", 2).tolist() == [[0.0], [0.0]]


def test_build_input_vectors_layout():
    store = make_store()
    e = ex("s1", ["cat", "dog"], [0, 1], target=1)
    xs = build_input_vectors(store, e)
    assert xs[0].data.tolist() == [1.0, 2.0, 10.0]
    assert xs[1].data.tolist() == [5.0, 6.0, 20.0]

    marker = EmbeddingLayer(np.array([[0.5], [0.9]]), trainable=True)
    xs = build_input_vectors(store, e, with_index=True, index_layer=marker)
    assert xs[0].data.tolist() == [1.0, 2.0, 10.0, 0.5]   # not the target
    assert xs[1].data.tolist() == [5.0, 6.0, 20.0, 0.9]   # the target
    assert xs[1].requires_grad

    one = build_input_vector(store, e, 0, with_index=True, index_layer=marker)
    assert one.data.tolist() == [1.0, 2.0, 10.0, 0.5]

    with pytest.raises(DomainError):
        build_input_vector(store, e, 5)
    with pytest.raises(DomainError):
        build_input_vectors(store, e, with_index=True)  # no layer
    with pytest.raises(DomainError):
        build_input_vectors(store, ex("s1", ["cat", "dog"], [0, 1]),
                            with_index=True, index_layer=marker)  # no target


# ---------------------------------------------------------------------------
# folds


def corpus(n_pos, n_neg):
    out = []
    for i in range(n_pos):
        out.append(ex(f"p{i}", ["a", "b"], [0, 1], target=1))
    for i in range(n_neg):
        out.append(ex(f"n{i}", ["a", "b"], [0, 0], target=1))
    return out


def test_fold_sizes_differ_by_at_most_one():
    data = corpus(317, 330)  # 647 total
    plan = make_folds(data, k=10, seed=0)
    sizes = [0] * 10
    for e in data:
        sizes[plan.fold_of(e)] += 1
    assert sum(sizes) == 647
    assert sorted(sizes) == [64, 64, 64, 65, 65, 65, 65, 65, 65, 65]


def test_folds_are_stratified():
    data = corpus(40, 63)
    plan = make_folds(data, k=10, seed=3)
    pos = [0] * 10
    neg = [0] * 10
    for e in data:
        (pos if e.id.startswith("p") else neg)[plan.fold_of(e)] += 1
    assert max(pos) - min(pos) <= 1
    assert max(neg) - min(neg) <= 1


def test_folds_deterministic_and_seed_sensitive():
    data = corpus(30, 50)
    a = make_folds(data, k=5, seed=1).assignments
    b = make_folds(data, k=5, seed=1).assignments
    c = make_folds(data, k=5, seed=2).assignments
    assert a == b
    assert a != c


def test_fold_split_preserves_order():
    data = corpus(10, 20)
    plan = make_folds(data, k=3, seed=0)
    train, test = plan.split(data, 0)
    assert len(train) + len(test) == 30
    assert set(e.id for e in train).isdisjoint(e.id for e in test)
    all_ids = [e.id for e in data]
    assert [e.id for e in train] == [i for i in all_ids if plan.assignments[i] != 0]


def test_fold_validation():
    data = corpus(3, 3)
    with pytest.raises(DomainError):
        make_folds(data, k=1)
    with pytest.raises(DomainError):
        make_folds(data, k=7)
    dup = data + [data[0]]
    with pytest.raises(DomainError):
        make_folds(dup, k=2)


# ---------------------------------------------------------------------------
# dev split


def test_dev_split_size_and_strata():
    data = corpus(3, 7)
    train, dev = dev_split(data, fraction=0.2, seed=0)
    assert len(dev) == 2 and len(train) == 8
    # largest remainder: 0.2*3=0.6 -> the positive group claims one slot
    assert sum(1 for e in dev if e.id.startswith("p")) == 1
    assert sum(1 for e in dev if e.id.startswith("n")) == 1


def test_dev_split_rounding():
    data = corpus(0, 25)
    train, dev = dev_split(data, fraction=0.1, seed=0)
    assert len(dev) == round(2.5) == 2
    data = corpus(0, 35)
    _, dev = dev_split(data, fraction=0.1, seed=0)
    assert len(dev) == 4  # round(3.5) banker's rounding


def test_dev_split_deterministic_order_preserving():
    data = corpus(10, 30)
    t1, d1 = dev_split(data, 0.25, seed=9)
    t2, d2 = dev_split(data, 0.25, seed=9)
    assert [e.id for e in t1] == [e.id for e in t2]
    assert [e.id for e in d1] == [e.id for e in d2]
    pos_in_input = [e.id for e in data]
    assert [e.id for e in t1] == [i for i in pos_in_input if i not in {e.id for e in d1}]
    t3, d3 = dev_split(data, 0.25, seed=10)
    assert {e.id for e in d3} != {e.id for e in d1}


def test_dev_split_degenerate():
    data = corpus(0, 3)
    with pytest.raises(DomainError):
        dev_split(data, 0.01)  # rounds to zero dev examples
    with pytest.raises(DomainError):
        dev_split(data, 0.9)   # rounds to zero train examples
    with pytest.raises(DomainError):
        dev_split(data, 1.5)


def test_writers_validate():
    with pytest.raises(DomainError):
        write_classification_csv([ex("1", ["a"], [0])], "/tmp/nope.csv")
    with pytest.raises(DomainError):
        write_sequence_jsonl([ex("1", ["a"], None)], "/tmp/nope.jsonl")
