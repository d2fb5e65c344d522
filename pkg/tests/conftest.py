"""Shared fixtures: a deterministic synthetic desk corpus with Zipf-ish
morphology (stems, affixes, occasional compounds), plus session-cached
trained models so the slow trainers run at most once per (algo, size)."""

from __future__ import annotations

import bisect
import random
from itertools import accumulate

import pytest

from toklab.bpe import train_bpe
from toklab.textio import Corpus, word_frequencies
from toklab.unigram import train_uni
from toklab.wordpiece import train_wpc

DESK_SEED = 20240
DESK_SENTENCES = 10_000

PREFIXES = ["", "", "", "", "un", "re", "pre", "over", "out", "mis"]
SUFFIXES = ["", "", "s", "ed", "ing", "er", "est", "ly", "ness", "ment",
            "able", "ful", "ish", "ion", "ity", "ous", "ive", "less"]


def _zipf_sampler(rng: random.Random, items, a: float):
    cum = list(accumulate(1.0 / (i + 1) ** a for i in range(len(items))))
    total = cum[-1]

    def pick():
        return items[bisect.bisect_left(cum, rng.random() * total)]

    return pick


def make_desk_sentences(n_sentences: int = DESK_SENTENCES, seed: int = DESK_SEED,
                        n_stems: int = 3000) -> list[str]:
    rng = random.Random(seed)
    alpha = "abcdefghijklmnopqrstuvwxyz"
    stems: list[str] = []
    seen: set[str] = set()
    while len(stems) < n_stems:
        w = "".join(rng.choice(alpha) for _ in range(rng.randint(3, 7)))
        if w not in seen:
            seen.add(w)
            stems.append(w)
    pick_stem = _zipf_sampler(rng, stems, 1.05)
    pick_pre = _zipf_sampler(rng, PREFIXES, 0.8)
    pick_suf = _zipf_sampler(rng, SUFFIXES, 0.9)
    sentences = []
    for _ in range(n_sentences):
        words = []
        for _ in range(rng.randint(6, 12)):
            base = pick_stem()
            if rng.random() < 0.18:
                base = base + pick_stem()
            words.append(pick_pre() + base + pick_suf())
        sentences.append(" ".join(words))
    return sentences


@pytest.fixture(scope="session")
def desk_corpus() -> Corpus:
    return Corpus(sentences=tuple(make_desk_sentences()), source_id="desk-news", language="xx")


@pytest.fixture(scope="session")
def small_corpus() -> Corpus:
    return Corpus(sentences=tuple(make_desk_sentences(n_sentences=400, seed=77, n_stems=300)),
                  source_id="small", language="xx")


_TRAINERS = {"bpe": train_bpe, "wpc": train_wpc, "uni": train_uni}


@pytest.fixture(scope="session")
def desk_models(desk_corpus):
    """get(algo, size) -> TokenizerModel, trained once per combination."""
    cache = {}

    def get(algo: str, size: int):
        key = (algo, size)
        if key not in cache:
            cache[key] = _TRAINERS[algo]([desk_corpus], size)
        return cache[key]

    return get


@pytest.fixture(scope="session")
def probe_words(desk_corpus) -> list[str]:
    """1,000 distinct word types sampled from the desk corpus."""
    types = list(word_frequencies([desk_corpus]))
    rng = random.Random(991)
    return rng.sample(types, 1000)


@pytest.fixture(scope="session")
def roundtrip_words(desk_corpus) -> list[str]:
    """10,000 running-text words sampled from the desk corpus."""
    stream = [w for s in desk_corpus for w in s.split()]
    rng = random.Random(992)
    return [rng.choice(stream) for _ in range(10_000)]


def make_sign_fixture(n_words: int, n_nonwords: int, seed: int,
                      rt_noise: float = 60.0, acc_noise: float = 0.09):
    """Synthetic stimuli plus a greedy-longest-match model built so that
    chunkability varies by construction and the human signals follow the
    reference sign pattern: for words, RT falls and accuracy rises with
    chunkability; for non-words, both effects reverse.

    Returns (model, stimuli).
    """
    from toklab.textio import Stimulus
    from toklab.vocab import TokenizerModel, Vocabulary

    rng = random.Random(seed)
    alpha = "abcdefghijklmnopqrstuvwxyz"
    seen: set[str] = set()

    def fresh_string():
        while True:
            w = "".join(rng.choice(alpha) for _ in range(rng.randint(5, 12)))
            if w not in seen:
                seen.add(w)
                return w

    sequences = [fresh_string() for _ in range(n_words + n_nonwords)]
    tokens: list[str] = list(alpha) + ["##" + c for c in alpha]
    token_set = set(tokens)

    def add(tok):
        if tok not in token_set:
            token_set.add(tok)
            tokens.append(tok)

    for w in sequences:
        granularity = rng.choice(("whole", "halves", "quarters", "chars"))
        if granularity == "whole":
            add(w)
        elif granularity == "halves":
            cut = len(w) // 2
            add(w[:cut])
            add("##" + w[cut:])
        elif granularity == "quarters":
            cuts = [0, len(w) // 4, len(w) // 2, 3 * len(w) // 4, len(w)]
            pieces = [w[a:b] for a, b in zip(cuts, cuts[1:]) if b > a]
            add(pieces[0])
            for piece in pieces[1:]:
                add("##" + piece)
        # "chars": only singles, chunkability 0

    vocabulary = Vocabulary(tokens=tuple(tokens), continuation_marker="##",
                            alphabet=frozenset(alpha))
    model = TokenizerModel(algorithm="WPC", vocabulary=vocabulary, merges=(),
                           metadata={"model_id": f"sign-fixture-{seed}",
                                     "flags": {"lowercase": False}})

    stimuli = []
    for i, w in enumerate(sequences):
        is_word = i < n_words
        c = 1.0 - model.encode(w).k / len(w)
        if is_word:
            rt = 900.0 - 280.0 * c + rng.gauss(0.0, rt_noise)
            acc = 0.55 + 0.40 * c + rng.gauss(0.0, acc_noise)
        else:
            rt = 580.0 + 280.0 * c + rng.gauss(0.0, rt_noise)
            acc = 0.97 - 0.40 * c + rng.gauss(0.0, acc_noise)
        stimuli.append(Stimulus(sequence=w, is_word=is_word, rt_ms=max(rt, 1.0),
                                accuracy=min(1.0, max(0.0, acc))))
    return model, stimuli


TABLE1_VOCAB = (
    [chr(c) for c in range(ord("a"), ord("z") + 1)]
    + ["##" + chr(c) for c in range(ord("a"), ord("z") + 1)]
    + ["seafood", "out", "##fo", "##ed", "br", "##ith", "##blo", "##om",
       "catch", "##wind"]
)


@pytest.fixture(scope="session")
def table1_model(tmp_path_factory):
    """WordPiece-style vocabulary reproducing the reference tokenizations
    seafood / out-fo-x-ed / br-ith-blo-om / catch-wind."""
    from toklab.vocab import import_external_vocab

    path = tmp_path_factory.mktemp("table1") / "vocab.txt"
    path.write_text("\n".join(TABLE1_VOCAB) + "\n", encoding="utf-8")
    return import_external_vocab(path, "wordpiece-list")


@pytest.fixture()
def table1_stimuli_csv(tmp_path):
    path = tmp_path / "table1.csv"
    path.write_text(
        "sequence,is_word,rt,accuracy\n"
        "seafood,1,578,0.97\n"
        "outfoxed,1,734,0.62\n"
        "brithbloom,0,693,0.97\n"
        "catchwind,0,788,0.82\n",
        encoding="utf-8")
    return path
