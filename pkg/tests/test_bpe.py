import pytest

from toklab.bpe import MergeRule, encode_bpe, merge_rules, train_bpe
from toklab.errors import DataError
from toklab.metrics import chunkability
from toklab.textio import Corpus
from toklab.vocab import TokenizerModel, TrainFlags, Vocabulary


def corpus(*sentences):
    return Corpus(sentences=tuple(sentences), source_id="test")


def bpe_model(merges, alphabet):
    tokens = sorted(alphabet)
    for left, right in merges:
        tokens.append(left + right)
    vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker="",
                            alphabet=frozenset(alphabet))
    return TokenizerModel(algorithm="BPE", vocabulary=vocabulary,
                          merges=tuple(merges))


# ---------------------------------------------------------------------------
# training


def test_first_merge_follows_pair_counts():
    # pair (a,b) occurs 3 times, (a,c) once: the first merge is (a,b)
    model = train_bpe([corpus("ab ab ab", "ac")], target_size=4)
    assert model.merges == (("a", "b"),)
    assert model.vocabulary.tokens == ("a", "b", "c", "ab")


def test_target_equal_alphabet_means_no_merges():
    model = train_bpe([corpus("abc abd")], target_size=4)
    assert model.merges == ()
    t = model.encode("abc")
    assert t.tokens == ("a", "b", "c") and chunkability(t) == 0.0


def test_target_below_alphabet_errors():
    with pytest.raises(DataError, match="alphabet"):
        train_bpe([corpus("abc")], target_size=2)


def test_empty_corpus_errors():
    with pytest.raises(DataError, match="empty"):
        train_bpe([Corpus(sentences=("   ",), source_id="x")], target_size=5)


def test_count_ties_break_lexicographically():
    # (b,a) and (d,c) both occur twice; (b,a) < (d,c)
    model = train_bpe([corpus("ba ba dc dc")], target_size=5)
    assert model.merges[0] == ("b", "a")


def test_merge_exhaustion_warns_and_stops(caplog):
    with caplog.at_level("WARNING"):
        model = train_bpe([corpus("ab ab")], target_size=50)
    # alphabet {a,b} + single merge ab: nothing else to merge
    assert model.vocabulary.tokens == ("a", "b", "ab")
    assert any("exhausted" in r.message for r in caplog.records)


def test_max_token_length_cap():
    word = "x" * 40
    model = train_bpe([corpus(f"{word} {word}")], target_size=60)
    assert all(len(t) <= 32 for t in model.vocabulary.tokens)


def test_multi_corpus_training_equals_concatenation():
    c1 = corpus("ab ab", "cd")
    c2 = corpus("ab cd cd")
    joint = train_bpe([c1, c2], target_size=8)
    merged = train_bpe([corpus("ab ab", "cd", "ab cd cd")], target_size=8)
    assert joint.vocabulary.tokens == merged.vocabulary.tokens
    assert joint.merges == merged.merges


def test_training_determinism(small_corpus):
    m1 = train_bpe([small_corpus], 300)
    m2 = train_bpe([small_corpus], 300)
    assert m1.vocabulary.tokens == m2.vocabulary.tokens
    assert m1.merges == m2.merges


def test_vocabulary_nesting(small_corpus):
    m_small = train_bpe([small_corpus], 200)
    m_large = train_bpe([small_corpus], 350)
    assert m_large.vocabulary.tokens[:200] == m_small.vocabulary.tokens
    assert m_large.merges[: len(m_small.merges)] == m_small.merges


def test_token_counts_non_increasing_with_vocabulary_growth(small_corpus):
    m_small = train_bpe([small_corpus], 200)
    m_large = train_bpe([small_corpus], 350)
    words = list({w for s in small_corpus for w in s.split()})[:300]
    for w in words:
        assert m_large.encode(w).k <= m_small.encode(w).k


def test_lowercase_flag():
    model = train_bpe([corpus("AB AB")], target_size=3,
                      flags=TrainFlags(lowercase=True))
    assert model.vocabulary.tokens == ("a", "b", "ab")
    model2 = train_bpe([corpus("AB AB")], target_size=3,
                       flags=TrainFlags(lowercase=False))
    assert model2.vocabulary.tokens == ("A", "B", "AB")


# ---------------------------------------------------------------------------
# encoding


def test_encode_applies_merges_in_rank_order():
    model = bpe_model([("s", "e"), ("se", "a")], alphabet="aes")
    assert encode_bpe(model, "sea").tokens == ("sea",)


def test_encode_rank_precedence():
    # rank 0 (a,b) fires first and pre-empts (b,c)
    model = bpe_model([("a", "b"), ("b", "c")], alphabet="abc")
    assert encode_bpe(model, "abc").tokens == ("ab", "c")


def test_encode_single_alphabet_char():
    model = bpe_model([("a", "b")], alphabet="abx")
    assert encode_bpe(model, "x").tokens == ("x",)


def test_encode_leftmost_occurrence_on_equal_rank():
    model = bpe_model([("a", "a")], alphabet="a")
    assert encode_bpe(model, "aaa").tokens == ("aa", "a")
    assert encode_bpe(model, "aaaa").tokens == ("aa", "aa")


def test_encode_roundtrip_on_corpus_words(small_corpus):
    model = train_bpe([small_corpus], 400)
    words = list({w for s in small_corpus for w in s.split()})[:200]
    for w in words:
        t = model.encode(w)
        assert "".join(t.tokens) == w


def test_alphabet_only_model_gives_zero_chunkability(small_corpus):
    from toklab.textio import word_frequencies

    alphabet_size = len({c for w in word_frequencies([small_corpus]) for c in w})
    model = train_bpe([small_corpus], alphabet_size)
    t = model.encode("overmixed")
    assert t.k == t.n and chunkability(t) == 0.0


def test_merge_rules_view():
    model = bpe_model([("s", "e"), ("se", "a")], alphabet="aes")
    rules = merge_rules(model)
    assert rules == [MergeRule("s", "e", 0), MergeRule("se", "a", 1)]
    assert rules[1].product == "sea"
