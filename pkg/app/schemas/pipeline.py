"""
Command configs. One model per subcommand; every field doubles as a flag and
as a key in a flat --config file. Unknown keys are rejected.
"""
from pathlib import Path
from typing import List, Optional

from pydantic import BaseModel, ConfigDict, Field, FilePath, field_validator, model_validator

from app.config import settings
from app.schemas.backtrans import GeneratorTraining
from app.schemas.corpus import Origin, Split
from app.schemas.model import Architecture


def _split_list(value):
    if isinstance(value, str):
        return [item.strip() for item in value.split(",") if item.strip()]
    return value


class CommandConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")


class BpeLearnConfig(CommandConfig):
    input: List[FilePath]
    merges: int = Field(settings.BPE_MERGES, ge=0)
    merges_out: Path
    vocab_out: Path

    @field_validator("input", mode="before")
    @classmethod
    def split_input(cls, value):
        return _split_list(value)


class BpeApplyConfig(CommandConfig):
    input: FilePath
    merges: FilePath
    vocab: FilePath
    output: Path


class TagConfig(CommandConfig):
    source: FilePath
    target: FilePath
    source_lang: str = "fr"
    target_lang: str = "en"
    tag: str = "noisy"
    side: str = "source"
    origin: Origin = Origin.NOISY_PARALLEL
    split: Split = Split.TRAIN
    output_prefix: Path


class MixConfig(CommandConfig):
    prefixes: List[str]
    source_lang: str = "fr"
    target_lang: str = "en"
    seed: int = settings.SEED
    ratios: Optional[List[float]] = None
    output_prefix: Path

    @field_validator("prefixes", "ratios", mode="before")
    @classmethod
    def split_lists(cls, value):
        return _split_list(value)

    @model_validator(mode="after")
    def check_inputs(self) -> "MixConfig":
        for prefix in self.prefixes:
            for lang in (self.source_lang, self.target_lang):
                if not Path(f"{prefix}.{lang}").is_file():
                    raise ValueError(f"{prefix}.{lang} does not exist")
        if self.ratios is not None and len(self.ratios) != len(self.prefixes):
            raise ValueError("ratios must list one value per prefix")
        return self


class StatsConfig(CommandConfig):
    prefix: Optional[str] = None
    source: Optional[FilePath] = None
    target: Optional[FilePath] = None
    origin: Origin = Origin.CLEAN_PARALLEL
    split: Split = Split.TRAIN
    source_lang: str = "fr"
    target_lang: str = "en"
    mono: Optional[FilePath] = None
    dataset: Optional[str] = None  # en2fr / fr2en: compare against published sizes
    output: Optional[Path] = None

    @model_validator(mode="after")
    def check_inputs(self) -> "StatsConfig":
        if self.prefix is None and (self.source is None or self.target is None) and self.mono is None:
            raise ValueError("give prefix, source+target, or mono")
        return self


class TrainConfig(Architecture):
    prefix: str
    source_lang: str = "fr"
    target_lang: str = "en"
    output: Path
    seed: int = settings.SEED
    steps: int = Field(1000, ge=0)
    batch_size: int = Field(64, ge=1)
    learning_rate: float = Field(1e-3, gt=0)
    warmup_steps: int = Field(400, ge=1)
    clip_norm: Optional[float] = Field(1.0, gt=0)
    log_interval: int = Field(100, ge=1)
    checkpoint_interval: int = Field(0, ge=0)
    stop_at_loss: Optional[float] = Field(None, gt=0)
    max_length: int = Field(settings.MAX_LENGTH, ge=1)
    # Continue from the newest interval checkpoint of a previous run with the same output
    resume: bool = False

    @model_validator(mode="after")
    def check_prefix(self) -> "TrainConfig":
        for lang in (self.source_lang, self.target_lang):
            if not Path(f"{self.prefix}.{lang}").is_file():
                raise ValueError(f"{self.prefix}.{lang} does not exist")
        return self

    @model_validator(mode="after")
    def check_resume(self) -> "TrainConfig":
        if self.resume and not self.checkpoint_interval:
            raise ValueError("resume needs checkpoint_interval > 0")
        return self


class DecodeCommandConfig(CommandConfig):
    checkpoints: List[FilePath]
    input: FilePath
    output: Path
    start_tag: Optional[str] = None  # clean / noisy, for models trained with target tags
    source_tag: Optional[str] = None  # clean / noisy / none, required for source-tagged models
    beam_size: int = Field(settings.BEAM_SIZE, ge=1)
    length_reward: float = settings.LENGTH_REWARD
    max_len: int = Field(settings.MAX_LENGTH, ge=1)
    nbest: Optional[Path] = None
    postprocess_lang: Optional[str] = None  # merge subwords, normalize and detokenize

    @field_validator("checkpoints", mode="before")
    @classmethod
    def split_checkpoints(cls, value):
        return _split_list(value)


class ScoreConfig(CommandConfig):
    hyp: Optional[FilePath] = None
    ref: FilePath
    # An n-best file from decode, rescored into hypotheses instead of reading hyp
    nbest: Optional[FilePath] = None
    length_reward: float = 0.0
    tok: str = "intl"
    lowercase: bool = False
    smooth: str = "none"
    output: Optional[Path] = None

    @field_validator("smooth")
    @classmethod
    def check_smooth(cls, value: str) -> str:
        if value not in ("none", "exp"):
            raise ValueError("smooth must be none or exp")
        return value

    @model_validator(mode="after")
    def check_hypotheses(self) -> "ScoreConfig":
        if (self.hyp is None) == (self.nbest is None):
            raise ValueError("give exactly one of hyp or nbest")
        return self


class PipelineConfig(GeneratorTraining):
    """
    Five-system comparison. With synthetic=true the corpora are generated,
    otherwise every corpus path is required.
    """
    synthetic: bool = False
    clean_source: Optional[FilePath] = None
    clean_target: Optional[FilePath] = None
    noisy_source: Optional[FilePath] = None
    noisy_target: Optional[FilePath] = None
    mono: Optional[FilePath] = None
    valid_source: Optional[FilePath] = None
    valid_target: Optional[FilePath] = None
    test_source: Optional[FilePath] = None
    test_target: Optional[FilePath] = None
    source_lang: str = "fr"
    target_lang: str = "en"
    moses_tokenize: bool = False

    # Synthetic corpus sizes
    synthetic_clean: int = Field(400, ge=1)
    synthetic_noisy: int = Field(100, ge=1)
    synthetic_mono: int = Field(400, ge=0)
    synthetic_valid: int = Field(50, ge=0)
    synthetic_test: int = Field(100, ge=1)
    lexicon_size: int = Field(40, ge=2)

    seed: int = settings.SEED
    bpe_merges: int = Field(settings.BPE_MERGES, ge=0)
    max_length: int = Field(settings.MAX_LENGTH, ge=1)
    generator_steps: Optional[int] = Field(None, ge=0)
    ensemble_size: int = Field(3, ge=2)
    beam_size: int = Field(settings.BEAM_SIZE, ge=1)
    length_reward: float = settings.LENGTH_REWARD
    tune_length_reward: bool = False
    output_dir: Path = Path("runs/experiment")

    @model_validator(mode="after")
    def check_corpora(self) -> "PipelineConfig":
        if self.synthetic:
            return self
        required = ("clean_source", "clean_target", "noisy_source", "noisy_target",
                    "mono", "test_source", "test_target")
        missing = [name for name in required if getattr(self, name) is None]
        if missing:
            raise ValueError(f"{missing[0]} is required unless synthetic=true")
        if self.tune_length_reward and (self.valid_source is None or self.valid_target is None):
            raise ValueError("valid_source is required when tune_length_reward=true")
        return self
