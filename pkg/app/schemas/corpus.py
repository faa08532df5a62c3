"""
Corpus schemas.
Contract: tags live only at position 0 of their side, reserved tokens never
appear inside sentence text, pairs are immutable values.
"""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Sequence, Tuple

from pydantic import BaseModel, Field, model_validator

from app.exceptions import EmptyInputError, TagInvariantError

PAD = "<pad>"
UNK = "<unk>"
BOS = "<s>"
EOS = "</s>"

# Reserved tokens take the lowest ids, in this order
RESERVED_TOKENS: Tuple[str, ...] = (
    PAD, UNK, BOS, EOS, "<clean>", "<noisy>", "<clean_s>", "<noisy_s>",
)
TAG_SURFACES = frozenset(RESERVED_TOKENS[4:])

Tokens = Tuple[str, ...]


class DomainKind(str, Enum):
    CLEAN = "CLEAN"
    NOISY = "NOISY"


class TagSide(str, Enum):
    SOURCE_START = "SOURCE_START"
    TARGET_START = "TARGET_START"


class Origin(str, Enum):
    CLEAN_PARALLEL = "CLEAN_PARALLEL"
    NOISY_PARALLEL = "NOISY_PARALLEL"
    SYNTHETIC_BACKTRANSLATED = "SYNTHETIC_BACKTRANSLATED"


class Split(str, Enum):
    TRAIN = "TRAIN"
    VALID = "VALID"
    TEST = "TEST"


class MixMode(str, Enum):
    INSENSITIVE = "INSENSITIVE"
    SENSITIVE = "SENSITIVE"


@dataclass(frozen=True)
class DomainTag:
    kind: DomainKind
    side: TagSide

    @property
    def surface(self) -> str:
        suffix = "_s" if self.side == TagSide.TARGET_START else ""
        return f"<{self.kind.value.lower()}{suffix}>"

    @classmethod
    def from_surface(cls, surface: str) -> "DomainTag":
        for tag in ALL_TAGS:
            if tag.surface == surface:
                return tag
        raise TagInvariantError(f"Not a domain tag: {surface!r}")

    @classmethod
    def parse(cls, kind: str, side: str = "source") -> "DomainTag":
        """CLI helper: ('noisy', 'target') -> <noisy_s>."""
        side_value = TagSide.TARGET_START if side.lower().startswith("t") else TagSide.SOURCE_START
        return cls(DomainKind(kind.upper()), side_value)


CLEAN_SOURCE = DomainTag(DomainKind.CLEAN, TagSide.SOURCE_START)
NOISY_SOURCE = DomainTag(DomainKind.NOISY, TagSide.SOURCE_START)
CLEAN_TARGET = DomainTag(DomainKind.CLEAN, TagSide.TARGET_START)
NOISY_TARGET = DomainTag(DomainKind.NOISY, TagSide.TARGET_START)
ALL_TAGS = (CLEAN_SOURCE, NOISY_SOURCE, CLEAN_TARGET, NOISY_TARGET)


@dataclass(frozen=True)
class TaggedSentencePair:
    source: Tokens
    target: Tokens
    tag: Optional[DomainTag] = None
    origin: Origin = Origin.CLEAN_PARALLEL
    split: Split = Split.TRAIN

    def __post_init__(self):
        object.__setattr__(self, "source", tuple(self.source))
        object.__setattr__(self, "target", tuple(self.target))
        for side_name in ("source", "target"):
            tokens = getattr(self, side_name)
            expected = None
            if self.tag is not None and self.tagged_side == side_name:
                expected = self.tag.surface
            if expected is not None and (not tokens or tokens[0] != expected):
                raise TagInvariantError(f"{side_name} must start with {expected}")
            body = tokens[1:] if expected is not None else tokens
            if any(token in TAG_SURFACES for token in body):
                raise TagInvariantError(f"Stray tag token inside {side_name}: {' '.join(tokens)}")
            if not body:
                raise EmptyInputError(f"Empty {side_name} sentence")

    @property
    def tagged_side(self) -> Optional[str]:
        if self.tag is None:
            return None
        return "source" if self.tag.side == TagSide.SOURCE_START else "target"

    @property
    def source_content(self) -> Tokens:
        return self.source[1:] if self.tagged_side == "source" else self.source

    @property
    def target_content(self) -> Tokens:
        return self.target[1:] if self.tagged_side == "target" else self.target


@dataclass(frozen=True)
class Corpus:
    pairs: Tuple[TaggedSentencePair, ...]
    source_lang: str
    target_lang: str
    # Pairs removed by the operation that produced this corpus
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @property
    def direction(self) -> Tuple[str, str]:
        return (self.source_lang, self.target_lang)

    def __len__(self) -> int:
        return len(self.pairs)

    def __iter__(self) -> Iterator[TaggedSentencePair]:
        return iter(self.pairs)

    @classmethod
    def empty(cls, source_lang: str, target_lang: str) -> "Corpus":
        return cls((), source_lang, target_lang)


@dataclass(frozen=True)
class MonoCorpus:
    sentences: Tuple[Tokens, ...]
    language: str
    dropped: int = 0

    def __post_init__(self):
        object.__setattr__(self, "sentences", tuple(tuple(s) for s in self.sentences))
        if any(len(s) == 0 for s in self.sentences):
            raise EmptyInputError("Monolingual corpus contains an empty sentence")

    def __len__(self) -> int:
        return len(self.sentences)


class StatsReport(BaseModel):
    counts: Dict[Origin, Dict[Split, int]] = Field(default_factory=dict)
    monolingual: int = Field(0, ge=0)
    length_histogram: Dict[str, int] = Field(default_factory=dict)
    total: int = Field(0, ge=0)
    dropped: int = Field(0, ge=0)

    @model_validator(mode="after")
    def check_totals(self) -> "StatsReport":
        summed = sum(n for per_split in self.counts.values() for n in per_split.values())
        if summed != self.total:
            raise ValueError(f"total {self.total} != sum of per-origin counts {summed}")
        return self

    def count(self, origin: Origin, split: Split = Split.TRAIN) -> int:
        return self.counts.get(origin, {}).get(split, 0)

    def to_text(self) -> str:
        """Flat key=value report."""
        lines = []
        for origin in Origin:
            for split in Split:
                lines.append(f"{origin.value}.{split.value}={self.count(origin, split)}")
        lines.append(f"MONOLINGUAL={self.monolingual}")
        lines.append(f"TOTAL={self.total}")
        lines.append(f"DROPPED={self.dropped}")
        for bucket, n in self.length_histogram.items():
            lines.append(f"LENGTH.{bucket}={n}")
        return "\n".join(lines) + "\n"
