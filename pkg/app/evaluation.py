"""
Corpus BLEU and system evaluation.
- n-gram statistics from sacreBLEU with international tokenization
- Score recomputed from the statistics so the report is arithmetically self-consistent
- Hypotheses: decode_bpe -> normalize -> detokenize -> score
- References: raw target text -> normalize -> detokenize, captured before BPE
"""
import logging
import math
from functools import lru_cache
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

from sacrebleu.metrics import BLEU

from app.decode import Translator, rescore
from app.exceptions import AlignmentError, EmptyInputError, ToolkitError
from app.schemas.corpus import Corpus
from app.schemas.decode import LENGTH_REWARD_GRID
from app.schemas.evaluation import BleuReport, SystemReport
from app.subword import decode_bpe, detokenize, normalize

logger = logging.getLogger(__name__)

MAX_ORDER = 4


@lru_cache(maxsize=None)
def _metric(tokenize: str, lowercase: bool, smooth: str) -> BLEU:
    return BLEU(tokenize=tokenize, lowercase=lowercase, smooth_method=smooth, force=True)


def _precisions(counts: Sequence[int], totals: Sequence[int], smooth: str) -> List[float]:
    precisions = []
    factor = 1.0
    for matched, total in zip(counts, totals):
        if total == 0:
            precisions.append(0.0)
        elif matched == 0 and smooth == "exp":
            factor *= 2.0
            precisions.append(1.0 / (factor * total))
        else:
            precisions.append(matched / total)
    return precisions


def corpus_bleu(hypotheses: Sequence[str], references: Sequence[str], tokenize: str = "intl",
                lowercase: bool = False, smooth: str = "none") -> BleuReport:
    """Corpus-level BLEU, single reference per sentence."""
    if len(hypotheses) != len(references):
        raise AlignmentError(
            f"{len(hypotheses)} hypotheses but {len(references)} references"
        )
    if smooth not in ("none", "exp"):
        raise ValueError(f"Unsupported smoothing {smooth!r}")
    stats = _metric(tokenize, lowercase, smooth).corpus_score(list(hypotheses), [list(references)])
    counts = [int(c) for c in stats.counts[:MAX_ORDER]]
    totals = [int(t) for t in stats.totals[:MAX_ORDER]]
    hyp_len, ref_len = int(stats.sys_len), int(stats.ref_len)

    if hyp_len == 0:
        bp = 0.0
    elif hyp_len >= ref_len:
        bp = 1.0
    else:
        bp = math.exp(1.0 - ref_len / hyp_len)
    precisions = _precisions(counts, totals, smooth)
    if bp == 0.0 or any(p <= 0.0 for p in precisions):
        score = 0.0
    else:
        score = bp * math.exp(sum(math.log(p) for p in precisions) / MAX_ORDER) * 100.0
    return BleuReport(
        score=min(score, 100.0), precisions=precisions, counts=counts, totals=totals,
        brevity_penalty=bp, hyp_len=hyp_len, ref_len=ref_len, tokenize=tokenize,
        lowercase=lowercase, smooth=smooth, sentences=len(hypotheses),
    )


def postprocess(tokens: Sequence[str], lang: str) -> str:
    """Subword units to scoring text."""
    text = normalize(decode_bpe(tokens), lang)
    return detokenize(text.split(), lang)


def raw_references(corpus: Corpus) -> List[str]:
    """Detokenized target text of an unsegmented corpus."""
    lang = corpus.target_lang
    return [detokenize(normalize(" ".join(pair.target_content), lang).split(), lang) for pair in corpus]


def _references(testset: Corpus, references: Optional[Sequence[str]]) -> List[str]:
    if references is None:
        return [postprocess(pair.target_content, testset.target_lang) for pair in testset]
    if len(references) != len(testset):
        raise AlignmentError(f"{len(references)} references for {len(testset)} test sentences")
    return list(references)


def evaluate_system(translator: Translator, testset: Corpus, hyp_path: Optional[Path] = None,
                    name: str = "system", smooth: str = "none",
                    references: Optional[Sequence[str]] = None) -> SystemReport:
    """
    Decode every test source and score. A sentence that fails to decode is
    recorded in errors and scored as an empty hypothesis.
    Pass the raw target text as references when the test set is BPE-segmented;
    without them the references are rebuilt from the segmented targets.
    """
    if len(testset) == 0:
        raise EmptyInputError("Cannot evaluate on an empty test set")
    references = _references(testset, references)
    lang = testset.target_lang
    hypotheses: List[str] = []
    errors: Dict[int, str] = {}
    for i, pair in enumerate(testset):
        try:
            hypotheses.append(postprocess(translator.translate_tokens(pair.source), lang))
        except ToolkitError as e:
            logger.warning(f"⚠️ Sentence {i} failed to decode: {e}")
            errors[i] = str(e)
            hypotheses.append("")
        if (i + 1) % 1000 == 0:
            logger.info(f"Decoded {i + 1}/{len(testset)} test sentences")

    if hyp_path is not None:
        write_lines(hyp_path, hypotheses)
    report = SystemReport(
        name=name,
        bleu=corpus_bleu(hypotheses, references, lowercase=True, smooth=smooth),
        bleu_cased=corpus_bleu(hypotheses, references, lowercase=False, smooth=smooth),
        hypotheses=hypotheses,
        errors=errors,
        length_reward=translator.config.length_reward,
    )
    logger.info(f"{name}: BLEU {report.bleu.score:.2f} / BLEU-cased {report.bleu_cased.score:.2f}")
    return report


def tune_length_reward(translator: Translator, devset: Corpus,
                       grid: Sequence[float] = LENGTH_REWARD_GRID,
                       references: Optional[Sequence[str]] = None) -> Tuple[float, Dict[float, float]]:
    """
    Decode the dev set once into n-best lists, then pick the reward whose
    rescored outputs give the best cased BLEU. Ties go to the reward closest to 0.
    """
    if len(devset) == 0:
        raise EmptyInputError("Cannot tune on an empty dev set")
    lang = devset.target_lang
    references = _references(devset, references)
    nbest_lists = [translator.nbest(pair.source) for pair in devset]
    scores: Dict[float, float] = {}
    for reward in grid:
        chosen = [rescore(hyps, reward) for hyps in nbest_lists]
        hypotheses = [postprocess(translator.to_tokens(h), lang) for h in chosen]
        scores[reward] = corpus_bleu(hypotheses, references).score
    best = max(grid, key=lambda r: (scores[r], -abs(r)))
    logger.info(f"Length reward tuned to {best} (BLEU {scores[best]:.2f})")
    return best, scores


def write_lines(path: Path, lines: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for line in lines:
            f.write(line + "\n")
    return path


def read_lines(path: Path) -> List[str]:
    with open(path, "r", encoding="utf-8") as f:
        return [line.rstrip("\n") for line in f]
