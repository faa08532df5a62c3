"""
Model shapes, initialization, forward pass, loss and checkpoints.
"""
import math

import pytest
import torch

from app.exceptions import CheckpointError, DecodeError, EmptyInputError
from app.models import BOS_ID, EOS_ID, TokenDistribution
from app.schemas.model import Activation, Architecture, ModelConfig, TrainState
from app.subword import Vocabulary
from app.training import forward, init_model, loss, parameter_checksum
from app.utils.checkpoint import CheckpointManager, load_checkpoint, save_checkpoint
from conftest import tiny_config


def test_config_rejects_bad_heads():
    with pytest.raises(ValueError):
        Architecture(d_model=30, heads=4)
    with pytest.raises(ValueError):
        tiny_config(max_positions=100)


def test_head_width():
    model = init_model(tiny_config(d_model=64, heads=4))
    assert model.config.head_dim == 16
    for layer in (*model.encoder_layers, *model.decoder_layers):
        assert layer.self_attn.head_dim == 16


def test_init_is_seeded():
    a = parameter_checksum(init_model(tiny_config(seed=1)))
    b = parameter_checksum(init_model(tiny_config(seed=1)))
    c = parameter_checksum(init_model(tiny_config(seed=2)))
    assert a == b
    assert a != c


def test_init_does_not_touch_global_rng():
    torch.manual_seed(123)
    expected = torch.rand(3)
    torch.manual_seed(123)
    init_model(tiny_config())
    assert torch.equal(torch.rand(3), expected)


def test_forward_one_distribution_per_prefix_position(model):
    dists = forward(model, [9, 10, EOS_ID], [BOS_ID])
    assert len(dists) == 1
    assert dists[0].position == 1
    assert dists[0].probabilities.shape == (18,)
    assert dists[0].is_valid(1e-9)


def test_forward_is_causal(model):
    short = forward(model, [9, 10, EOS_ID], [BOS_ID, 9])
    longer = forward(model, [9, 10, EOS_ID], [BOS_ID, 9, 12, 13])
    for a, b in zip(short, longer):
        assert torch.allclose(a.probabilities, b.probabilities, atol=1e-6)


def test_zeroed_output_projection_is_uniform(model):
    with torch.no_grad():
        model.target_embedding.weight.zero_()
    dist = forward(model, [9, EOS_ID], [BOS_ID])[0]
    assert torch.allclose(dist.probabilities, torch.full((18,), 1 / 18, dtype=torch.float64))


def test_forward_rejects_bad_ids(model):
    with pytest.raises(DecodeError):
        forward(model, [], [BOS_ID])
    with pytest.raises(DecodeError):
        forward(model, [99], [BOS_ID])
    with pytest.raises(DecodeError):
        forward(model, [9] * 300, [BOS_ID])


def _one_hot(index, size=5):
    p = torch.zeros(size, dtype=torch.float64)
    p[index] = 1.0
    return TokenDistribution(p, 1)


def test_loss_values():
    assert loss([_one_hot(2)], [2]) == 0.0

    uniform = TokenDistribution(torch.full((7,), 1 / 7, dtype=torch.float64), 1)
    assert loss([uniform, uniform], [3, 4]) == pytest.approx(math.log(7), abs=1e-12)

    p = torch.tensor([0.7, 0.1, 0.1, 0.05, 0.05], dtype=torch.float64)
    eps = 0.1
    q = [eps / 5] * 5
    q[0] += 1 - eps
    expected = -sum(qi * math.log(pi) for qi, pi in zip(q, p.tolist()))
    assert loss([TokenDistribution(p, 1)], [0], smoothing=eps) == pytest.approx(expected, abs=1e-12)


def test_loss_skips_padding():
    assert loss([_one_hot(2), _one_hot(1)], [2, 0]) == 0.0
    with pytest.raises(EmptyInputError):
        loss([_one_hot(2)], [0])
    with pytest.raises(ValueError):
        loss([_one_hot(2)], [2, 2])


def test_checkpoint_roundtrip(tmp_path, model):
    vocab = Vocabulary.build([f"t{i}" for i in range(10)])
    state = TrainState(step=3, loss_curve=[(1, 2.0), (2, 1.5), (3, 1.2)])
    path = save_checkpoint(model, tmp_path / "m.pt", vocab, vocab, state)
    loaded = load_checkpoint(path)
    assert parameter_checksum(loaded.model) == parameter_checksum(model)
    assert loaded.model.config == model.config
    assert loaded.source_vocab.tokens == vocab.tokens
    assert loaded.train_state.step == 3
    assert loaded.train_state.final_loss == 1.2


def test_truncated_checkpoint(tmp_path, model):
    path = save_checkpoint(model, tmp_path / "m.pt")
    data = path.read_bytes()
    path.write_bytes(data[: len(data) // 2])
    with pytest.raises(CheckpointError):
        load_checkpoint(path)
    with pytest.raises(CheckpointError):
        load_checkpoint(tmp_path / "missing.pt")


def test_checkpoint_shape_mismatch(tmp_path, model):
    path = save_checkpoint(model, tmp_path / "m.pt")
    with pytest.raises(CheckpointError):
        load_checkpoint(path, expected_config=tiny_config(d_model=64))


def test_checkpoint_manager(tmp_path, model):
    manager = CheckpointManager(tmp_path / "run")
    assert manager.latest() is None
    manager.save(model, 5)
    manager.save(model, 12)
    assert [p.name for p in manager.list()] == ["step_0000005.pt", "step_0000012.pt"]
    assert manager.latest().name == "step_0000012.pt"


def test_model_config_carries_tag_convention():
    config = ModelConfig(source_vocab_size=10, target_vocab_size=10, target_tags=True,
                         activation=Activation.GELU)
    assert config.target_tags
    assert config.architecture()["activation"] == Activation.GELU
