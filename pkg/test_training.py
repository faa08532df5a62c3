"""
Gradient check, training loop and the overfit sanity run.
"""
import pytest
import torch

from app.decode import EnsembleSpec, Translator
from app.evaluation import corpus_bleu
from app.exceptions import DivergenceError, EmptyInputError
from app.models import BOS_ID, EOS_ID
from app.schemas.corpus import NOISY_TARGET, TaggedSentencePair
from app.schemas.model import Activation, TrainHyperparams
from app.training import (
    collate, encode_corpus, encode_pair, gradient_check, init_model, inverse_sqrt_factor,
    parameter_checksum, train,
)
from app.subword import Vocabulary
from app.utils.checkpoint import load_checkpoint
from app.utils.synthetic import build_synthetic_data
from conftest import tiny_config

EXAMPLES = [
    ([9, 10, 11, EOS_ID], [BOS_ID, 12, 13, EOS_ID]),
    ([12, 9, EOS_ID], [BOS_ID, 14, 9, 10, EOS_ID]),
    ([15, 16, 17, 18, EOS_ID], [BOS_ID, 11, EOS_ID]),
]


def test_gradient_check_double_precision():
    model = init_model(tiny_config(activation=Activation.GELU, label_smoothing=0.1))
    error = gradient_check(model, EXAMPLES, epsilon=1e-5, num_coords=200, seed=0)
    assert error < 1e-4


def test_gradient_check_is_repeatable(model):
    first = gradient_check(model, EXAMPLES[:2], num_coords=50, seed=4)
    second = gradient_check(model, EXAMPLES[:2], num_coords=50, seed=4)
    assert first == second


def test_gradient_check_leaves_model_untouched(model):
    before = parameter_checksum(model)
    gradient_check(model, EXAMPLES[:1], num_coords=20)
    assert parameter_checksum(model) == before
    assert next(model.parameters()).dtype == torch.float32


def test_gradient_check_needs_examples(model):
    with pytest.raises(EmptyInputError):
        gradient_check(model, [])
    with pytest.raises(EmptyInputError):
        collate([])


def test_encode_pair_uses_tag_as_start_symbol():
    vocab = Vocabulary.from_sentences([["hello", "bonjour"]])
    tagged = TaggedSentencePair(("hello",), ("<noisy_s>", "bonjour"), NOISY_TARGET)
    source, target = encode_pair(tagged, vocab, vocab)
    assert source == [vocab.index["hello"], EOS_ID]
    assert target == [vocab.index["<noisy_s>"], vocab.index["bonjour"], EOS_ID]

    plain = TaggedSentencePair(("hello",), ("bonjour",))
    assert encode_pair(plain, vocab, vocab)[1][0] == BOS_ID


def test_inverse_sqrt_schedule():
    assert inverse_sqrt_factor(0, 4) == pytest.approx(0.25)
    assert inverse_sqrt_factor(3, 4) == pytest.approx(1.0)
    assert inverse_sqrt_factor(15, 4) == pytest.approx(0.5)


def _hyperparams(**overrides):
    values = dict(steps=20, batch_size=2, learning_rate=1e-3, warmup_steps=5, seed=3, log_interval=5)
    values.update(overrides)
    return TrainHyperparams(**values)


def test_zero_steps_leaves_model_unchanged(model):
    before = parameter_checksum(model)
    _, state = train(model, EXAMPLES, _hyperparams(steps=0))
    assert parameter_checksum(model) == before
    assert state.step == 0


def test_training_is_deterministic():
    checksums = []
    for _ in range(2):
        model = init_model(tiny_config())
        _, state = train(model, EXAMPLES, _hyperparams())
        checksums.append(parameter_checksum(model))
    assert checksums[0] == checksums[1]
    assert state.step == 20
    assert len(state.loss_curve) == 20


def test_training_reduces_loss():
    model = init_model(tiny_config())
    _, state = train(model, EXAMPLES, _hyperparams(steps=60, learning_rate=3e-3))
    assert state.loss_curve[-1][1] < state.loss_curve[0][1]


def test_training_empty_corpus(model):
    with pytest.raises(EmptyInputError):
        train(model, [], _hyperparams())


def test_resume_matches_uninterrupted_run(tmp_path):
    straight = init_model(tiny_config())
    train(straight, EXAMPLES, _hyperparams(steps=12))

    first = init_model(tiny_config())
    _, state = train(first, EXAMPLES, _hyperparams(steps=6, checkpoint_dir=str(tmp_path), checkpoint_interval=6))
    resumed = load_checkpoint(tmp_path / "step_0000006.pt")
    model = resumed.model.train()
    train(model, EXAMPLES, _hyperparams(steps=12), state=resumed.train_state)
    assert parameter_checksum(model) == parameter_checksum(straight)


def test_divergence_restores_weights(tmp_path):
    model = init_model(tiny_config())
    with pytest.raises(DivergenceError) as info:
        train(model, EXAMPLES, _hyperparams(steps=40, learning_rate=1e30, clip_norm=None,
                                             checkpoint_dir=str(tmp_path), checkpoint_interval=1))
    assert info.value.step >= 1
    for tensor in model.state_dict().values():
        assert torch.isfinite(tensor).all()


@pytest.mark.slow
def test_overfit_toy_corpus():
    data = build_synthetic_data(5, lexicon_size=12, clean_pairs=64, noisy_pairs=0, valid_pairs=0,
                                test_pairs=0, mono_sentences=0, heldout=0, min_len=2, max_len=4)
    corpus = data.clean
    source_vocab = Vocabulary.from_sentences(p.source for p in corpus)
    target_vocab = Vocabulary.from_sentences(p.target for p in corpus)
    config = tiny_config(source_vocab_size=len(source_vocab), target_vocab_size=len(target_vocab),
                         d_model=64, ffn_dim=128)
    model = init_model(config)
    hp = TrainHyperparams(steps=2000, batch_size=16, learning_rate=2e-3, warmup_steps=100, seed=1,
                          log_interval=100)
    _, state = train(model, encode_corpus(corpus, source_vocab, target_vocab), hp)
    assert state.final_loss < 0.1

    translator = Translator(EnsembleSpec([model]), source_vocab, target_vocab)
    hypotheses = [" ".join(translator.translate_tokens(p.source)) for p in corpus]
    references = [" ".join(p.target) for p in corpus]
    assert corpus_bleu(hypotheses, references).score >= 99.0
