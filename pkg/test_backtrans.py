"""
Generator corpus, pseudo-source generation, training-set assembly, steering.
"""
import pytest

from app.backtrans import (
    _match_fraction, assemble_training_set, build_generator_corpus, generate_pseudo_sources,
    run_backtranslation, run_tag_steering_experiment,
)
from app.corpus import reverse_direction
from app.decode import EnsembleSpec
from app.exceptions import DirectionMismatchError, TagMismatchError
from app.schemas.backtrans import BacktransPlan, SteeringConfig
from app.schemas.corpus import (
    RESERVED_TOKENS, Corpus, MixMode, MonoCorpus, Origin, TaggedSentencePair,
)
from app.subword import Vocabulary
from app.training import init_model
from app.utils.synthetic import NoisyStyle, build_synthetic_data, in_style
from conftest import tiny_config, toy_corpus, write_text

RESERVED = set(RESERVED_TOKENS)


def test_generator_corpus_reverses_and_tags():
    clean = Corpus((TaggedSentencePair(("bonjour",), ("hello",)),), "fr", "en")
    noisy = Corpus((TaggedSentencePair(("slt",), ("hi",), None, Origin.NOISY_PARALLEL),), "fr", "en")
    generator_corpus = build_generator_corpus(clean, noisy, seed=1)
    assert generator_corpus.direction == ("en", "fr")
    assert len(generator_corpus) == 2
    by_source = {p.source: p.target for p in generator_corpus}
    assert by_source[("hello",)] == ("<clean_s>", "bonjour")
    assert by_source[("hi",)] == ("<noisy_s>", "slt")

    blind = build_generator_corpus(clean, noisy, seed=1, domain_sensitive=False)
    assert all(p.tag is None for p in blind)


def test_generator_corpus_direction_mismatch():
    with pytest.raises(DirectionMismatchError):
        build_generator_corpus(toy_corpus(2), reverse_direction(toy_corpus(2)), seed=1)


def test_assemble_sensitive_tags_every_pair_once():
    clean = toy_corpus(1)
    noisy = toy_corpus(1, Origin.NOISY_PARALLEL)
    synthetic = toy_corpus(1, Origin.SYNTHETIC_BACKTRANSLATED)
    assembled = assemble_training_set(clean, noisy, synthetic, MixMode.SENSITIVE, seed=3)
    firsts = sorted(p.source[0] for p in assembled)
    assert firsts == ["<clean>", "<noisy>", "<noisy>"]
    for p in assembled:
        assert not RESERVED.intersection(p.source[1:])
        assert not RESERVED.intersection(p.target)


def test_assemble_insensitive_has_no_reserved_tokens():
    assembled = assemble_training_set(
        toy_corpus(3), toy_corpus(2, Origin.NOISY_PARALLEL), toy_corpus(4, Origin.SYNTHETIC_BACKTRANSLATED),
        MixMode.INSENSITIVE, seed=3,
    )
    assert len(assembled) == 9
    assert all(not RESERVED.intersection(p.source + p.target) for p in assembled)


def test_assemble_direction_mismatch():
    with pytest.raises(DirectionMismatchError):
        assemble_training_set(toy_corpus(1), toy_corpus(1), reverse_direction(toy_corpus(1)),
                              MixMode.SENSITIVE, seed=1)


def _generator(target_tags=True):
    model = init_model(tiny_config(source_lang="en", target_lang="fr", target_tags=target_tags))
    source_vocab = Vocabulary.build([f"e{i}" for i in range(12)])
    target_vocab = Vocabulary.build([f"f{i}" for i in range(10)])
    return EnsembleSpec([model]), source_vocab, target_vocab


def _mono(n=5):
    return MonoCorpus(tuple((f"e{i}", f"e{i + 1}") for i in range(n)), "en")


def test_generate_pseudo_sources_accounting():
    generator, source_vocab, target_vocab = _generator()
    mono = _mono()
    synthetic = generate_pseudo_sources(generator, mono, source_vocab, target_vocab, beam=2, max_len=5)
    assert synthetic.direction == ("fr", "en")
    assert len(synthetic) + synthetic.dropped == len(mono)
    for pair in synthetic:
        assert pair.origin == Origin.SYNTHETIC_BACKTRANSLATED
        assert pair.target in mono.sentences
        assert not RESERVED.intersection(pair.source)


def test_generate_from_empty_mono():
    generator, source_vocab, target_vocab = _generator()
    synthetic = generate_pseudo_sources(generator, MonoCorpus((), "en"), source_vocab, target_vocab)
    assert len(synthetic) == 0


def test_generate_sampling_is_seeded():
    generator, source_vocab, target_vocab = _generator()
    runs = [
        generate_pseudo_sources(generator, _mono(), source_vocab, target_vocab, sample=True, seed=4, max_len=5)
        for _ in range(2)
    ]
    assert runs[0].pairs == runs[1].pairs


def test_generate_errors():
    generator, source_vocab, target_vocab = _generator()
    with pytest.raises(DirectionMismatchError):
        generate_pseudo_sources(generator, MonoCorpus((("e1",),), "fr"), source_vocab, target_vocab)
    blind, source_vocab, target_vocab = _generator(target_tags=False)
    with pytest.raises(TagMismatchError):
        generate_pseudo_sources(blind, _mono(), source_vocab, target_vocab)


def test_synthetic_data_styles():
    data = build_synthetic_data(3, lexicon_size=10, clean_pairs=20, noisy_pairs=20, valid_pairs=0,
                                test_pairs=5, mono_sentences=5, heldout=5)
    assert all(in_style(p.source, str.lower) for p in data.clean)
    assert all(in_style(p.source, str.upper) for p in data.noisy)
    assert [p.target for p in data.clean] == [p.target for p in data.noisy]
    assert not in_style([], str.upper)
    assert in_style([], str.upper, empty_matches=True)


def test_empty_outputs_do_not_match_either_style():
    outputs = [[], [], ["abc"]]
    assert _match_fraction(outputs, str.lower) == pytest.approx(1 / 3)
    assert _match_fraction(outputs, str.upper) == 0.0
    assert _match_fraction(outputs, str.lower, empty_matches=True) == 1.0
    assert _match_fraction([], str.lower) == 0.0


def test_degenerate_styles_match_by_construction(tmp_path):
    config = SteeringConfig(steps=0, train_sources=20, heldout=5, lexicon_size=10,
                            noisy_style=NoisyStyle.IDENTITY, train_blind=False, output_dir=tmp_path)
    report = run_tag_steering_experiment(config)
    assert report.tagged_match == {"<clean_s>": 1.0, "<noisy_s>": 1.0}
    assert (tmp_path / "steering.json").exists()


@pytest.mark.slow
def test_tag_steering():
    report = run_tag_steering_experiment(SteeringConfig())
    assert report.heldout == 200
    assert report.mixing_ratio == 0.5
    assert report.tagged_match["<clean_s>"] >= 0.95
    assert report.tagged_match["<noisy_s>"] >= 0.95
    # A tag-blind generator trained on an even mix follows each style about half the time
    assert set(report.blind_match) == {"clean", "noisy"}
    assert abs(report.blind_match["clean"] - 0.5) <= 0.15
    assert abs(report.blind_match["noisy"] - 0.5) <= 0.15


def _plan_files(tmp_path):
    data = build_synthetic_data(21, lexicon_size=15, clean_pairs=120, noisy_pairs=60, shared_sources=False,
                                valid_pairs=0, test_pairs=0, mono_sentences=40, heldout=0)
    files = {}
    for name, corpus in (("clean", data.clean), ("noisy", data.noisy)):
        files[f"{name}_source"] = write_text(tmp_path / f"{name}.fr", [" ".join(p.source) for p in corpus])
        files[f"{name}_target"] = write_text(tmp_path / f"{name}.en", [" ".join(p.target) for p in corpus])
    files["mono"] = write_text(tmp_path / "mono.en", [" ".join(s) for s in data.mono.sentences])
    return files


@pytest.mark.slow
def test_backtranslation_pipeline_is_reproducible(tmp_path):
    files = _plan_files(tmp_path)
    outputs = []
    for run in ("a", "b"):
        plan = BacktransPlan(**files, steps=200, beam=2, d_model=32, ffn_dim=64,
                             output_prefix=tmp_path / run / "train")
        augmented, result = run_backtranslation(plan)
        assert result.accounting_ok
        assert result.augmented_pairs == 120 + 60 + result.synthetic_kept
        assert result.synthetic_kept + result.synthetic_dropped == 40
        assert augmented.direction == ("fr", "en")
        outputs.append([open(path, "rb").read() for path in result.output_files])
    assert outputs[0] == outputs[1]
