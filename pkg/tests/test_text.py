"""Vocabulary construction, encoding, and persistence."""

import pytest

from crosscap.text import BOUNDARY, SPECIALS, UNK, VocabError, Vocabulary, build_vocab


def test_specials_get_ids_zero_and_one():
    v = build_vocab([["cat"]], min_count=1)
    assert v.id(BOUNDARY) == 0
    assert v.id(UNK) == 1
    assert v.boundary_id == 0
    assert v.unk_id == 1


def test_frequency_then_lexicographic_order():
    sents = [["b", "b", "c", "a"], ["c", "a", "a"]]
    v = build_vocab(sents, min_count=1)
    # a appears 3x, then b and c tie at 2 -> lexicographic
    assert v.encode(["a", "b", "c"]) == [2, 3, 4]


def test_order_independent_of_sentence_order():
    sents = [["x", "y"], ["y", "z"], ["z", "x"], ["x"]]
    v1 = build_vocab(sents, min_count=1)
    v2 = build_vocab(list(reversed(sents)), min_count=1)
    assert v1.encode(["x", "y", "z"]) == v2.encode(["x", "y", "z"])


def test_min_count_boundary_is_inclusive():
    sents = [["a", "a", "b"]]
    v = build_vocab(sents, min_count=2)
    assert "a" in v
    assert "b" not in v
    v1 = build_vocab(sents, min_count=1)
    assert "b" in v1


def test_unknown_tokens_encode_to_unk():
    v = build_vocab([["a"]], min_count=1)
    assert v.encode(["a", "never-seen"]) == [v.id("a"), v.unk_id]
    assert v.id("never-seen") == v.unk_id


def test_decode_round_trip():
    v = build_vocab([["red", "dog", "runs"]], min_count=1)
    tokens = ["red", "dog", "runs"]
    assert v.decode(v.encode(tokens)) == tokens


def test_decode_out_of_range_raises():
    v = build_vocab([["a"]], min_count=1)
    with pytest.raises(VocabError, match="outside"):
        v.decode([len(v)])


def test_reserved_tokens_rejected_in_corpus():
    with pytest.raises(VocabError, match="reserved"):
        build_vocab([[BOUNDARY]], min_count=1)
    with pytest.raises(VocabError, match="reserved"):
        build_vocab([["ok", UNK]], min_count=1)


def test_empty_corpus_rejected():
    with pytest.raises(VocabError, match="empty"):
        build_vocab([], min_count=1)


def test_min_count_must_be_positive():
    with pytest.raises(VocabError, match="min_count"):
        build_vocab([["a"]], min_count=0)


def test_save_load_round_trip(tmp_path):
    v = build_vocab([["b", "a", "a"], ["c", "c", "c"]], min_count=1)
    path = tmp_path / "vocab.txt"
    v.save(path)
    loaded = Vocabulary.load(path)
    assert len(loaded) == len(v)
    for tok in ("a", "b", "c") + SPECIALS:
        assert loaded.id(tok) == v.id(tok)


def test_load_rejects_non_dense_ids(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("0\t<s/e>\t0\n2\t<unk>\t0\n")
    with pytest.raises(VocabError, match="line 2"):
        Vocabulary.load(path)


def test_load_rejects_malformed_line(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("0\t<s/e>\n")
    with pytest.raises(VocabError, match="line 1"):
        Vocabulary.load(path)


def test_vocabulary_requires_specials():
    with pytest.raises(VocabError, match="special"):
        Vocabulary(["a", "b"], {"a": 1, "b": 1}, min_count=1)
