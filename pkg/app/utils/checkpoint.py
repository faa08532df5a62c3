"""
Checkpoint container and interval manager.
Contract: self-describing (config header, named tensors with shape and dtype,
version), little-endian zip container, written atomically; load(save(m)) is
bit-exact.
"""
import logging
import os
import sys
from dataclasses import asdict, dataclass
from pathlib import Path
from typing import Dict, List, Optional

import torch

from app.exceptions import CheckpointError
from app.models import Seq2SeqTransformer
from app.schemas.model import ModelConfig, TrainState
from app.subword import Vocabulary

logger = logging.getLogger(__name__)

CHECKPOINT_FORMAT = "nmt-robust-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class Checkpoint:
    model: Seq2SeqTransformer
    source_vocab: Optional[Vocabulary] = None
    target_vocab: Optional[Vocabulary] = None
    train_state: Optional[TrainState] = None
    path: Optional[Path] = None


def save_checkpoint(model: Seq2SeqTransformer, path: Path,
                    source_vocab: Optional[Vocabulary] = None,
                    target_vocab: Optional[Vocabulary] = None,
                    train_state: Optional[TrainState] = None) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tensors = {name: t.detach().cpu().contiguous().clone() for name, t in model.state_dict().items()}
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "byteorder": sys.byteorder,
        "config": model.config.model_dump(mode="json"),
        "shapes": {name: list(t.shape) for name, t in tensors.items()},
        "dtypes": {name: str(t.dtype) for name, t in tensors.items()},
        "tensors": tensors,
        "source_vocab": source_vocab.tokens if source_vocab else None,
        "target_vocab": target_vocab.tokens if target_vocab else None,
        "train_state": asdict(train_state) if train_state else None,
    }
    tmp_path = path.with_name(path.name + ".tmp")
    torch.save(payload, tmp_path)
    os.replace(tmp_path, path)
    logger.info(f"Checkpoint written: {path}")
    return path


def _check_shapes(expected: Dict[str, torch.Size], stored: Dict[str, list], path: Path) -> None:
    missing = sorted(set(expected) - set(stored))
    extra = sorted(set(stored) - set(expected))
    if missing or extra:
        raise CheckpointError(f"{path}: tensor names differ (missing={missing}, unexpected={extra})")
    for name, shape in expected.items():
        if list(shape) != list(stored[name]):
            raise CheckpointError(
                f"{path}: shape mismatch for {name}: checkpoint {stored[name]}, expected {list(shape)}"
            )


def load_checkpoint(path: Path, expected_config: Optional[ModelConfig] = None) -> Checkpoint:
    """
    Rebuild the model from the stored config. With expected_config, tensor
    shapes are checked against that config instead.
    """
    path = Path(path)
    try:
        payload = torch.load(path, map_location="cpu", weights_only=True)
    except FileNotFoundError as e:
        raise CheckpointError(f"Checkpoint not found: {path}") from e
    except Exception as e:
        raise CheckpointError(f"Unreadable checkpoint {path}: {e}") from e

    if not isinstance(payload, dict) or payload.get("format") != CHECKPOINT_FORMAT:
        raise CheckpointError(f"{path} is not a toolkit checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise CheckpointError(f"{path}: unsupported checkpoint version {payload.get('version')}")

    config = ModelConfig(**payload["config"])
    target_config = expected_config or config
    model = Seq2SeqTransformer(target_config)
    _check_shapes({k: v.shape for k, v in model.state_dict().items()}, payload["shapes"], path)

    tensors = payload["tensors"]
    if any(t.dtype == torch.float64 for t in tensors.values()):
        model = model.double()
    model.load_state_dict(tensors, strict=True)
    model.eval()

    state = None
    if payload.get("train_state"):
        raw = payload["train_state"]
        raw["loss_curve"] = [tuple(entry) for entry in raw.get("loss_curve", [])]
        state = TrainState(**raw)
    source_vocab = Vocabulary(payload["source_vocab"]) if payload.get("source_vocab") else None
    target_vocab = Vocabulary(payload["target_vocab"]) if payload.get("target_vocab") else None
    return Checkpoint(model, source_vocab, target_vocab, state, path)


class CheckpointManager:
    """Keeps interval checkpoints of one training run in a directory."""

    def __init__(self, directory: Path, prefix: str = "step"):
        self.directory = Path(directory)
        self.prefix = prefix
        self.directory.mkdir(parents=True, exist_ok=True)

    def path_for(self, step: int) -> Path:
        return self.directory / f"{self.prefix}_{step:07d}.pt"

    def save(self, model: Seq2SeqTransformer, step: int, state: Optional[TrainState] = None,
             source_vocab: Optional[Vocabulary] = None,
             target_vocab: Optional[Vocabulary] = None) -> Path:
        return save_checkpoint(model, self.path_for(step), source_vocab, target_vocab, state)

    def list(self) -> List[Path]:
        return sorted(self.directory.glob(f"{self.prefix}_*.pt"))

    def latest(self) -> Optional[Path]:
        checkpoints = self.list()
        return checkpoints[-1] if checkpoints else None
