import random

import pytest

from toklab.errors import DataError
from toklab.metrics import char_length, chunkability, metric_value, num_tokens
from toklab.vocab import Tokenization


def tok(source, tokens, marker="##"):
    return Tokenization(source=source, tokens=tuple(tokens), marker=marker)


def test_reference_values_from_lexical_decision_examples():
    # seafood: 1 token over 7 chars, reported as 0.86
    assert abs(chunkability(tok("seafood", ["seafood"])) - 0.86) <= 0.005
    # out-fo-x-ed: 4 tokens over 8 chars -> 0.50
    assert chunkability(tok("outfoxed", ["out", "##fo", "##x", "##ed"])) == pytest.approx(0.50)
    # br-ith-blo-om: 4 tokens over 10 chars -> 0.60
    assert chunkability(tok("brithbloom", ["br", "##ith", "##blo", "##om"])) == pytest.approx(0.60)
    # catch-wind: 2 tokens over 9 chars, reported as 0.78
    assert abs(chunkability(tok("catchwind", ["catch", "##wind"])) - 0.78) <= 0.005


def test_full_character_split_is_zero():
    t = tok("abcd", ["a", "##b", "##c", "##d"])
    assert chunkability(t) == 0.0


def test_num_tokens():
    assert num_tokens(tok("catchwind", ["catch", "##wind"])) == 2
    assert num_tokens(tok("seafood", ["seafood"])) == 1
    assert num_tokens(tok("brithbloom", ["br", "##ith", "##blo", "##om"])) == 4


def test_char_length():
    assert char_length("seafood") == 7
    assert char_length("outfoxed") == 8
    assert char_length("brithbloom") == 10
    with pytest.raises(DataError):
        char_length("")


def test_unsplit_chunkability_approaches_one_with_length():
    values = [chunkability(tok("x" * n, ["x" * n], marker="")) for n in (2, 5, 20, 100)]
    assert values == sorted(values)
    assert values[-1] > 0.98


def test_metrics_mutually_consistent_on_random_tokenizations():
    rng = random.Random(5)
    for _ in range(200):
        n = rng.randint(1, 30)
        source = "".join(rng.choice("abcdef") for _ in range(n))
        # random cut points
        cuts = sorted(rng.sample(range(1, n), rng.randint(0, n - 1)) if n > 1 else [])
        bounds = [0] + cuts + [n]
        tokens = [source[a:b] for a, b in zip(bounds, bounds[1:])]
        t = tok(source, tokens, marker="")
        c = chunkability(t)
        assert c == pytest.approx(1.0 - num_tokens(t) / char_length(source), abs=1e-15)
        assert 0.0 <= c < 1.0
        assert (c == 0.0) == (t.k == t.n)


def test_anti_monotone_in_token_count():
    # same source, more tokens -> strictly lower chunkability
    t1 = tok("abcdef", ["abcdef"], marker="")
    t2 = tok("abcdef", ["abc", "def"], marker="")
    t3 = tok("abcdef", ["ab", "cd", "ef"], marker="")
    assert chunkability(t1) > chunkability(t2) > chunkability(t3)


def test_metric_value_dispatch():
    t = tok("seafood", ["seafood"])
    assert metric_value("chunkability", t) == chunkability(t)
    assert metric_value("num_tokens", t) == 1.0
    assert metric_value("char_length", t) == 7.0
    with pytest.raises(DataError):
        metric_value("entropy", t)
