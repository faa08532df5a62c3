"""
Model and training schemas.
Contract: shapes derive from ModelConfig alone; invalid shape arithmetic is a
config error, not a runtime surprise.
"""
from dataclasses import dataclass, field as dataclass_field
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

from pydantic import BaseModel, ConfigDict, Field, model_validator


class Activation(str, Enum):
    RELU = "relu"
    GELU = "gelu"


class Architecture(BaseModel):
    """Shape and regularization settings, shared with experiment configs as flat keys."""
    model_config = ConfigDict(frozen=True, extra="forbid")

    d_model: int = Field(64, gt=0)
    layers: int = Field(2, ge=1)
    heads: int = Field(4, ge=1)
    ffn_dim: int = Field(256, gt=0)
    dropout: float = Field(0.1, ge=0.0, lt=1.0)
    max_positions: int = Field(258, ge=258)
    label_smoothing: float = Field(0.1, ge=0.0, lt=1.0)
    activation: Activation = Activation.RELU

    @model_validator(mode="after")
    def check_heads(self) -> "Architecture":
        if self.d_model % self.heads != 0:
            raise ValueError(f"d_model {self.d_model} not divisible by heads {self.heads}")
        return self

    @property
    def head_dim(self) -> int:
        return self.d_model // self.heads

    def architecture(self) -> Dict[str, Any]:
        return {name: getattr(self, name) for name in Architecture.model_fields}


class ModelConfig(Architecture):
    source_vocab_size: int = Field(..., gt=8)
    target_vocab_size: int = Field(..., gt=8)
    seed: int = 1

    # Language labels and tag convention travel with the weights
    source_lang: str = "src"
    target_lang: str = "tgt"
    target_tags: bool = False
    source_tags: bool = False


class TrainHyperparams(BaseModel):
    model_config = ConfigDict(extra="forbid")

    steps: int = Field(1000, ge=0)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)  # peak, reached at the end of warmup
    warmup_steps: int = Field(400, ge=1)
    beta1: float = 0.9
    beta2: float = 0.98
    adam_eps: float = 1e-9
    clip_norm: Optional[float] = Field(1.0, gt=0)
    seed: int = 1
    deterministic: bool = True
    log_interval: int = Field(100, ge=1)
    checkpoint_interval: int = Field(0, ge=0)  # 0 = final checkpoint only
    checkpoint_dir: Optional[str] = None
    stop_at_loss: Optional[float] = Field(None, gt=0)


@dataclass
class TrainState:
    step: int = 0
    loss_curve: List[Tuple[int, float]] = dataclass_field(default_factory=list)
    optimizer_state: Dict[str, Any] = dataclass_field(default_factory=dict)
    scheduler_state: Dict[str, Any] = dataclass_field(default_factory=dict)
    checkpoints: List[str] = dataclass_field(default_factory=list)

    @property
    def final_loss(self) -> float:
        return self.loss_curve[-1][1] if self.loss_curve else float("nan")
