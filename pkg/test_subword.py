"""
BPE learning and application, Moses text processing.
"""
from collections import Counter

import numpy as np
import pytest

from app.exceptions import ContaminationError, EmptyInputError
from app.schemas.corpus import NOISY_TARGET, Corpus, MonoCorpus, TaggedSentencePair
from app.subword import (
    END_OF_WORD, SubwordModel, Vocabulary, apply_bpe, decode_bpe, detokenize, intl_tokenize,
    learn_bpe, moses_tokenize, normalize, segment_corpus, segment_mono,
)

FIXTURE = ["low"] * 5 + ["lower"] * 2 + ["newest"] * 6 + ["widest"] * 3


def brute_force_merges(words, num_merges):
    """Recount every adjacent pair after each merge; ties to the smallest pair."""
    freq = Counter(words)
    segmented = {w: tuple(w[:-1]) + (w[-1] + END_OF_WORD,) for w in freq}
    merges = []
    for _ in range(num_merges):
        counts = Counter()
        for w, symbols in segmented.items():
            for pair in zip(symbols, symbols[1:]):
                counts[pair] += freq[w]
        if not counts:
            break
        best_count = max(counts.values())
        if best_count < 2:
            break
        best = min(pair for pair, c in counts.items() if c == best_count)
        merges.append(best)
        for w, symbols in segmented.items():
            out, i = [], 0
            while i < len(symbols):
                if i < len(symbols) - 1 and (symbols[i], symbols[i + 1]) == best:
                    out.append(symbols[i] + symbols[i + 1])
                    i += 2
                else:
                    out.append(symbols[i])
                    i += 1
            segmented[w] = tuple(out)
    return merges


def random_sentences(rng, count, alphabet="abcde", max_words=6, max_chars=7):
    sentences = []
    for _ in range(count):
        n = int(rng.integers(1, max_words + 1))
        sentences.append([
            "".join(rng.choice(list(alphabet), size=int(rng.integers(1, max_chars + 1))))
            for _ in range(n)
        ])
    return sentences


def test_fixture_merges_match_oracle():
    model = learn_bpe([FIXTURE], 4)
    assert model.merges == brute_force_merges(FIXTURE, 4)
    assert model.merges[:3] == [("e", "s"), ("es", "t</w>"), ("l", "o")]


@pytest.mark.parametrize("seed", range(5))
def test_random_merges_match_oracle(seed):
    rng = np.random.default_rng(seed)
    sentences = random_sentences(rng, 40)
    words = [w for s in sentences for w in s]
    assert learn_bpe(sentences, 30).merges == brute_force_merges(words, 30)


def test_zero_merges_is_character_level():
    model = learn_bpe(["low lower"], 0)
    assert model.merges == []
    assert apply_bpe(model, ["low"]) == ["l@@", "o@@", "w"]


def test_merges_stop_at_exhaustion():
    model = learn_bpe(["ab ab"], 50)
    assert 0 < len(model.merges) < 50


def test_merge_prefix_monotonicity():
    rng = np.random.default_rng(11)
    sentences = random_sentences(rng, 60)
    for k in range(0, 25, 3):
        assert learn_bpe(sentences, k + 1).merges[:k] == learn_bpe(sentences, k).merges


def test_learn_bpe_errors():
    with pytest.raises(EmptyInputError):
        learn_bpe([], 10)
    with pytest.raises(ContaminationError):
        learn_bpe(["hello <noisy>"], 10)


def test_apply_bpe_fixture():
    model = learn_bpe([FIXTURE], 3)
    assert apply_bpe(model, ["lowest"]) == ["lo@@", "w@@", "est"]
    assert apply_bpe(model, []) == []


def test_seen_word_becomes_single_token():
    model = learn_bpe([FIXTURE], 20)
    assert apply_bpe(model, ["newest"]) == ["newest"]


def test_unknown_characters_map_to_unk():
    model = learn_bpe([FIXTURE], 3)
    assert "<unk>" in apply_bpe(model, ["zest"])


def test_decode_apply_roundtrip():
    rng = np.random.default_rng(3)
    model = learn_bpe(random_sentences(rng, 200), 40)
    for sentence in random_sentences(rng, 1000):
        assert decode_bpe(apply_bpe(model, sentence)) == " ".join(sentence)


def test_literal_continuation_marker_roundtrips():
    model = learn_bpe(["x@@ y"] * 5, 50)
    assert decode_bpe(apply_bpe(model, ["x@@", "y"])) == "x@@ y"
    assert not apply_bpe(model, ["x@@"])[-1].endswith("@@")


def test_roundtrip_with_markup_characters():
    rng = np.random.default_rng(5)
    model = learn_bpe(random_sentences(rng, 200, alphabet="ab@&#;"), 30)
    for sentence in random_sentences(rng, 300, alphabet="ab@&#;"):
        assert decode_bpe(apply_bpe(model, sentence)) == " ".join(sentence)


def test_decode_bpe():
    assert decode_bpe(["lo@@", "w"]) == "low"
    assert decode_bpe(["<noisy>", "he@@", "llo"]) == "hello"
    assert decode_bpe([]) == ""


def test_model_save_load(tmp_path):
    model = learn_bpe([FIXTURE], 6)
    model.save(tmp_path / "merges.txt", tmp_path / "vocab.txt")
    loaded = SubwordModel.load(tmp_path / "merges.txt", tmp_path / "vocab.txt")
    assert loaded.merges == model.merges
    assert loaded.vocabulary.tokens == model.vocabulary.tokens
    assert apply_bpe(loaded, ["widest", "lower"]) == apply_bpe(model, ["widest", "lower"])


def test_vocabulary_reserved_ids():
    vocab = Vocabulary.from_sentences([["b", "a"], ["c"]])
    assert vocab.tokens[:8] == ["<pad>", "<unk>", "<s>", "</s>", "<clean>", "<noisy>", "<clean_s>", "<noisy_s>"]
    assert vocab.tokens[8:] == ["a", "b", "c"]
    assert vocab.encode(["c", "zzz"]) == [10, 1]
    with pytest.raises(ValueError):
        Vocabulary(["a", "b"])


def test_segment_corpus_keeps_tag_whole():
    model = learn_bpe([FIXTURE], 3)
    pair = TaggedSentencePair(("lowest",), ("<noisy_s>", "newest"), NOISY_TARGET)
    segmented = segment_corpus(Corpus((pair,), "en", "fr"), model, model).pairs[0]
    assert segmented.target[0] == "<noisy_s>"
    assert segmented.tag == NOISY_TARGET
    assert decode_bpe(segmented.target) == "newest"
    mono = segment_mono(MonoCorpus((("lowest",),), "en"), model)
    assert mono.sentences[0] == ("lo@@", "w@@", "est")


def test_normalize():
    assert normalize("« bonjour »", "fr") == '"bonjour"'
    assert normalize("a  b") == "a b"
    assert normalize("plain ascii text.") == "plain ascii text."


@pytest.mark.parametrize("text", [
    "« bonjour »", "a  b\t c", "l’homme “quoted”", "plain ascii text.", "",
])
def test_normalize_is_idempotent(text):
    once = normalize(text, "fr")
    assert normalize(once, "fr") == once


def test_intl_tokenize():
    assert intl_tokenize("Hello, world!") == ["Hello", ",", "world", "!"]
    assert intl_tokenize("") == []
    tokens = intl_tokenize("It's 3.5 km, isn't it?")
    assert intl_tokenize(" ".join(tokens)) == tokens


def test_moses_roundtrip():
    assert moses_tokenize("Hello, world!") == ["Hello", ",", "world", "!"]
    assert detokenize(["Hello", ",", "world", "!"]) == "Hello, world!"
    assert detokenize(["solo"]) == "solo"
    assert detokenize([]) == ""
