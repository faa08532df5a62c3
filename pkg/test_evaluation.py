"""
Corpus BLEU against a brute-force n-gram oracle; system evaluation.
"""
import math
from collections import Counter

import numpy as np
import pytest

from app.decode import EnsembleSpec, Translator
from app.evaluation import (
    corpus_bleu, evaluate_system, postprocess, raw_references, read_lines, tune_length_reward,
)
from app.exceptions import AlignmentError, EmptyInputError
from app.schemas.corpus import Corpus, Origin, Split, TaggedSentencePair
from app.schemas.decode import LENGTH_REWARD_GRID, DecodeConfig
from app.subword import Vocabulary, intl_tokenize, learn_bpe, segment_corpus
from app.training import init_model
from conftest import tiny_config

WORDS = ["the", "cat", "sat", "on", "mat", "a", "dog", "ran", "."]


def oracle_bleu(hypotheses, references):
    """Clipped n-gram counts, orders 1-4, single reference, no smoothing."""
    matched = [0] * 4
    totals = [0] * 4
    hyp_len = ref_len = 0
    for hyp, ref in zip(hypotheses, references):
        h, r = intl_tokenize(hyp), intl_tokenize(ref)
        hyp_len += len(h)
        ref_len += len(r)
        for n in range(1, 5):
            h_grams = Counter(tuple(h[i:i + n]) for i in range(len(h) - n + 1))
            r_grams = Counter(tuple(r[i:i + n]) for i in range(len(r) - n + 1))
            matched[n - 1] += sum(min(c, r_grams[g]) for g, c in h_grams.items())
            totals[n - 1] += max(0, len(h) - n + 1)
    if hyp_len == 0 or any(m == 0 for m in matched):
        return 0.0
    bp = 1.0 if hyp_len >= ref_len else math.exp(1 - ref_len / hyp_len)
    return bp * math.exp(sum(math.log(m / t) for m, t in zip(matched, totals)) / 4) * 100


def random_corpus(rng, size):
    def sentence():
        return " ".join(rng.choice(WORDS, size=int(rng.integers(3, 10))))
    return [sentence() for _ in range(size)], [sentence() for _ in range(size)]


@pytest.mark.parametrize("seed", range(20))
def test_matches_oracle(seed):
    rng = np.random.default_rng(seed)
    hypotheses, references = random_corpus(rng, int(rng.integers(2, 8)))
    # Share some sentences so higher-order matches occur
    hypotheses[0] = references[0]
    report = corpus_bleu(hypotheses, references)
    assert report.score == pytest.approx(oracle_bleu(hypotheses, references), abs=1e-9)


def test_identical_scores_100():
    lines = ["the cat sat on the mat .", "a dog ran on the mat", "Hello, world!"]
    assert corpus_bleu(lines, lines).score == 100.0


def test_no_fourgram_matches_scores_zero():
    hypotheses = ["the cat sat on", "a dog ran ."]
    references = ["on sat cat the", ". ran dog a"]
    report = corpus_bleu(hypotheses, references)
    assert report.counts[3] == 0
    assert report.score == 0.0
    assert corpus_bleu(hypotheses, references, smooth="exp").score > 0.0


def test_three_sentence_fixture():
    hypotheses = ["the cat sat on the mat", "a dog ran on the mat .", "the cat ran"]
    references = ["the cat sat on a mat", "a dog ran on the mat .", "a cat ran away"]
    report = corpus_bleu(hypotheses, references)
    assert report.score == pytest.approx(oracle_bleu(hypotheses, references), abs=1e-9)
    assert report.counts[0] == 14
    assert report.totals[0] == 16


def test_report_arithmetic_identity():
    rng = np.random.default_rng(7)
    hypotheses, references = random_corpus(rng, 6)
    hypotheses[1] = references[1]
    report = corpus_bleu(hypotheses, references)
    assert report.score == pytest.approx(report.formula_score(), abs=1e-9)
    assert 0.0 < report.brevity_penalty <= 1.0
    assert report.signature() == "tok:intl|case:mixed|smooth:none"


def test_exact_match_substitution_never_hurts():
    rng = np.random.default_rng(9)
    _, references = random_corpus(rng, 8)
    # Same lengths as the references, so the brevity penalty stays fixed
    hypotheses = [
        " ".join(w if rng.random() < 0.6 else str(rng.choice(WORDS)) for w in ref.split())
        for ref in references
    ]
    hypotheses[0] = references[0]
    score = corpus_bleu(hypotheses, references).score
    for i in range(1, len(hypotheses)):
        hypotheses[i] = references[i]
        improved = corpus_bleu(hypotheses, references).score
        assert improved >= score - 1e-12
        score = improved


def test_lowercase_and_alignment():
    assert corpus_bleu(["THE CAT SAT ON"], ["the cat sat on"], lowercase=True).score == 100.0
    assert corpus_bleu(["THE CAT SAT ON"], ["the cat sat on"]).score == 0.0
    with pytest.raises(AlignmentError):
        corpus_bleu(["a"], ["a", "b"])


def test_empty_hypotheses():
    report = corpus_bleu(["", ""], ["the cat sat on", "a dog ran ."])
    assert report.score == 0.0
    assert report.brevity_penalty == 0.0


def test_postprocess_order():
    assert postprocess(["he@@", "llo", ",", "world", "!"], "en") == "hello, world!"
    assert postprocess(["<noisy>", "a"], "en") == "a"


def _testset(n=4):
    pairs = tuple(
        TaggedSentencePair((f"s{i}", f"s{i + 1}"), (f"t{i}",), None, Origin.NOISY_PARALLEL, Split.TEST)
        for i in range(n)
    )
    return Corpus(pairs, "fr", "en")


def _translator():
    source_vocab = Vocabulary.build([f"s{i}" for i in range(12)])
    target_vocab = Vocabulary.build([f"t{i}" for i in range(10)])
    return Translator(EnsembleSpec([init_model(tiny_config())]), source_vocab, target_vocab, None,
                      DecodeConfig(beam_size=2, max_len=4))


def test_evaluate_system_writes_hypotheses(tmp_path):
    report = evaluate_system(_translator(), _testset(), hyp_path=tmp_path / "sys.hyp", name="tiny")
    assert report.name == "tiny"
    assert len(report.hypotheses) == 4
    assert read_lines(tmp_path / "sys.hyp") == report.hypotheses
    assert report.ok
    assert "BLEU-cased" in report.to_text()
    with pytest.raises(EmptyInputError):
        evaluate_system(_translator(), Corpus.empty("fr", "en"))


def test_tune_length_reward_picks_grid_value():
    reward, scores = tune_length_reward(_translator(), _testset())
    assert reward in LENGTH_REWARD_GRID
    assert set(scores) == set(LENGTH_REWARD_GRID)


def test_rerun_writes_identical_hypothesis_file(tmp_path):
    evaluate_system(_translator(), _testset(), hyp_path=tmp_path / "a.hyp")
    evaluate_system(_translator(), _testset(), hyp_path=tmp_path / "b.hyp")
    assert (tmp_path / "a.hyp").read_bytes() == (tmp_path / "b.hyp").read_bytes()


def test_raw_references_bypass_segmentation():
    raw = Corpus((TaggedSentencePair(("le", "zoo"), ("zoo", "cat"), None, Origin.NOISY_PARALLEL, Split.TEST),),
                 "fr", "en")
    segmented = segment_corpus(raw, learn_bpe(["le chat"], 0), learn_bpe(["the cat", "a cat"], 5))
    # Characters outside the target BPE alphabet are lost from the segmented side
    assert postprocess(next(iter(segmented)).target_content, "en") != "zoo cat"
    assert raw_references(raw) == ["zoo cat"]


def test_references_must_align_with_test_set():
    with pytest.raises(AlignmentError):
        evaluate_system(_translator(), _testset(), references=["t0"] * 3)
    report = evaluate_system(_translator(), _testset(), references=["t0", "t1", "t2", "t3"])
    assert len(report.hypotheses) == 4


@pytest.mark.parametrize("seed", range(5))
def test_score_ignores_joint_sentence_order(seed):
    rng = np.random.default_rng(seed)
    hypotheses, references = random_corpus(rng, 12)
    order = rng.permutation(12)
    shuffled = corpus_bleu([hypotheses[i] for i in order], [references[i] for i in order])
    assert shuffled.score == pytest.approx(corpus_bleu(hypotheses, references).score)
