"""
Evaluation and experiment report schemas.
"""
import math
from typing import Dict, List, Optional

from pydantic import BaseModel, Field

# Order of preprocessing applied to hypotheses before scoring
PIPELINE_ORDER = "decode_bpe -> normalize -> detokenize -> score"


class BleuReport(BaseModel):
    score: float = Field(..., ge=0.0, le=100.0)
    precisions: List[float]  # ratios in [0, 1], orders 1..4
    counts: List[int]
    totals: List[int]
    brevity_penalty: float = Field(..., ge=0.0, le=1.0)
    hyp_len: int
    ref_len: int
    tokenize: str = "intl"
    lowercase: bool = False
    smooth: str = "none"
    sentences: int = 0

    def formula_score(self) -> float:
        """BP * exp(mean log p_n) * 100, recomputed from the recorded precisions."""
        if any(p <= 0.0 for p in self.precisions):
            return 0.0
        return self.brevity_penalty * math.exp(sum(math.log(p) for p in self.precisions) / len(self.precisions)) * 100.0

    def signature(self) -> str:
        case = "lc" if self.lowercase else "mixed"
        return f"tok:{self.tokenize}|case:{case}|smooth:{self.smooth}"

    def to_text(self) -> str:
        precisions = "/".join(f"{100 * p:.1f}" for p in self.precisions)
        ratio = self.hyp_len / self.ref_len if self.ref_len else 0.0
        return (
            f"BLEU = {self.score:.2f} {precisions} (BP = {self.brevity_penalty:.3f} "
            f"ratio = {ratio:.3f} hyp_len = {self.hyp_len} ref_len = {self.ref_len}) "
            f"[{self.signature()}]"
        )


class SystemReport(BaseModel):
    """Scores of one system on one test set, plus its outputs."""
    name: str = "system"
    bleu: BleuReport  # lowercased
    bleu_cased: BleuReport
    hypotheses: List[str] = Field(default_factory=list)
    errors: Dict[int, str] = Field(default_factory=dict)
    length_reward: float = 0.0
    pipeline_order: str = PIPELINE_ORDER

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_text(self) -> str:
        lines = [
            f"system: {self.name}",
            f"BLEU (lowercased): {self.bleu.to_text()}",
            f"BLEU-cased: {self.bleu_cased.to_text()}",
            f"sentences: {len(self.hypotheses)}  errors: {len(self.errors)}",
            f"length_reward: {self.length_reward}",
            f"preprocessing: {self.pipeline_order}",
        ]
        return "\n".join(lines) + "\n"


class SteeringReport(BaseModel):
    """Tagged generator vs tag-blind generator on held-out sources."""
    heldout: int
    mixing_ratio: float = 0.5
    tagged_match: Dict[str, float]  # tag surface -> fraction of outputs in that tag's style
    blind_match: Dict[str, float]  # style name -> fraction of tag-blind outputs in that style
    tagged_noisy_bleu: Optional[float] = None
    blind_noisy_bleu: Optional[float] = None
    tagged_final_loss: Optional[float] = None
    blind_final_loss: Optional[float] = None
    samples: List[Dict[str, str]] = Field(default_factory=list)

    def to_text(self) -> str:
        lines = [f"held-out sources: {self.heldout} (mixing ratio {self.mixing_ratio:.2f})"]
        for tag, fraction in self.tagged_match.items():
            lines.append(f"tagged {tag}: style match {fraction:.3f}")
        for style, fraction in self.blind_match.items():
            lines.append(f"tag-blind {style}: style match {fraction:.3f}")
        if self.tagged_noisy_bleu is not None:
            lines.append(f"noisy generation BLEU tagged: {self.tagged_noisy_bleu:.2f}")
        if self.blind_noisy_bleu is not None:
            lines.append(f"noisy generation BLEU tag-blind: {self.blind_noisy_bleu:.2f}")
        return "\n".join(lines) + "\n"


class ComparisonRow(BaseModel):
    method: str
    bleu: float
    bleu_cased: float
    training_pairs: int
    synthetic_pairs: int = 0
    members: int = 1
    errors: int = 0


class ComparisonTable(BaseModel):
    title: str = "Results of different methods on the noisy test set"
    rows: List[ComparisonRow] = Field(default_factory=list)
    notes: List[str] = Field(default_factory=list)

    def to_text(self) -> str:
        width = max([len(r.method) for r in self.rows] + [len("Method")])
        header = f"{'Method':<{width}}  {'BLEU':>6}  {'BLEU-cased':>10}  {'pairs':>8}  {'synthetic':>9}"
        lines = [self.title, header, "-" * len(header)]
        for r in self.rows:
            lines.append(
                f"{r.method:<{width}}  {r.bleu:6.2f}  {r.bleu_cased:10.2f}  "
                f"{r.training_pairs:8d}  {r.synthetic_pairs:9d}"
            )
        lines.extend(self.notes)
        return "\n".join(lines) + "\n"
