"""
Back-translation schemas: plan files and the tag-steering experiment.
"""
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, Field, FilePath, field_validator

from app.schemas.corpus import MixMode
from app.schemas.model import Architecture
from app.utils.synthetic import NoisyStyle


class GeneratorTraining(Architecture):
    """Flat training keys for a generator trained inside a plan or experiment."""
    steps: int = Field(1500, ge=0)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    warmup_steps: int = Field(200, ge=1)
    clip_norm: Optional[float] = Field(1.0, gt=0)
    log_interval: int = Field(100, ge=1)


class BacktransPlan(GeneratorTraining):
    """
    Flat key=value plan. Corpora are in the final translation direction
    (source_lang -> target_lang); the generator runs target_lang -> source_lang.
    """
    clean_source: FilePath
    clean_target: FilePath
    noisy_source: FilePath
    noisy_target: FilePath
    mono: FilePath
    source_lang: str = "fr"
    target_lang: str = "en"
    # Trained from the corpora when absent
    generator_checkpoint: Optional[FilePath] = None
    # "noisy", "clean", or "none" for a generator trained without target tags
    generation_tag: str = "noisy"
    mode: MixMode = MixMode.SENSITIVE
    seed: int = 13
    beam: int = Field(4, ge=1)
    sample: bool = False
    max_len: int = Field(256, ge=1)
    output_prefix: Path = Path("runs/augmented/train")

    @field_validator("generation_tag")
    @classmethod
    def check_tag(cls, value: str) -> str:
        value = value.lower()
        if value not in ("noisy", "clean", "none"):
            raise ValueError("generation_tag must be noisy, clean or none")
        return value


class BacktransResult(BaseModel):
    generator_pairs: int
    mono_sentences: int
    synthetic_kept: int
    synthetic_dropped: int
    clean_pairs: int
    noisy_pairs: int
    augmented_pairs: int
    output_files: List[str] = Field(default_factory=list)
    generator_checkpoint: Optional[str] = None

    @property
    def accounting_ok(self) -> bool:
        return (
            self.augmented_pairs == self.clean_pairs + self.noisy_pairs + self.synthetic_kept
            and self.synthetic_kept + self.synthetic_dropped == self.mono_sentences
        )


class SteeringConfig(GeneratorTraining):
    seed: int = 13
    lexicon_size: int = Field(40, ge=2)
    train_sources: int = Field(400, ge=1)
    heldout: int = Field(200, ge=1)
    min_len: int = Field(3, ge=1)
    max_len: int = Field(6, ge=1)
    noisy_style: NoisyStyle = NoisyStyle.UPPER
    beam: int = Field(1, ge=1)
    train_blind: bool = True
    # Seeded sampling for the tag-blind baseline instead of beam decoding
    blind_sample: bool = True
    output_dir: Optional[Path] = None
