"""
Translation commands: back-translation, decoding, scoring.
"""
import json
import logging
from pathlib import Path
from typing import Optional

from app.backtrans import run_backtranslation
from app.decode import Translator, read_nbest, rescore_nbest, write_nbest
from app.evaluation import corpus_bleu, postprocess, read_lines, write_lines
from app.exceptions import ConfigError, ToolkitError
from app.routers import CommandRouter
from app.schemas.backtrans import BacktransPlan
from app.schemas.corpus import DomainTag
from app.schemas.decode import DecodeConfig
from app.schemas.pipeline import DecodeCommandConfig, ScoreConfig

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["translation"])


def _parse_tag(value: str, side: str, key: str) -> DomainTag:
    try:
        return DomainTag.parse(value, side)
    except ValueError as e:
        raise ConfigError(f"Invalid value for '{key}': {value}", key=key) from e



def _resolve_source_tag(value: Optional[str], source_tags: bool) -> Optional[DomainTag]:
    """A source-tagged model needs an explicit clean, noisy or none."""
    if value is None:
        if source_tags:
            raise ConfigError(
                "Model was trained on source-tagged data: pass source_tag=clean, noisy or none",
                key="source_tag",
            )
        return None
    if value.lower() == "none":
        return None
    if not source_tags:
        raise ConfigError(f"Model was trained without source tags, got source_tag={value}", key="source_tag")
    return _parse_tag(value, "source", "source_tag")


@router.command("backtranslate", BacktransPlan)
def backtranslate(plan: BacktransPlan):
    """Train or load a reverse generator, decode monolingual text, write the augmented corpus."""
    _, result = run_backtranslation(plan)
    logger.info(
        f"Augmented corpus: {result.augmented_pairs} pairs "
        f"({result.synthetic_kept} synthetic, {result.synthetic_dropped} dropped)"
    )
    if not result.accounting_ok:
        logger.error("❌ Output pair count does not match its inputs")
        return 1
    return 0


@router.command("decode", DecodeCommandConfig)
def decode(config: DecodeCommandConfig):
    """Translate a tokenized file with one checkpoint or an ensemble of them."""
    start_tag = _parse_tag(config.start_tag, "target", "start_tag") if config.start_tag else None
    translator = Translator.from_checkpoints(
        config.checkpoints, start_tag,
        DecodeConfig(beam_size=config.beam_size, length_reward=config.length_reward, max_len=config.max_len),
    )
    source_tag = _resolve_source_tag(config.source_tag, translator.ensemble.source_tags)

    def render(hypothesis) -> str:
        tokens = translator.to_tokens(hypothesis)
        if config.postprocess_lang:
            return postprocess(tokens, config.postprocess_lang)
        return " ".join(tokens)

    outputs = []
    nbest_lists = []
    errors = 0
    for i, line in enumerate(read_lines(config.input)):
        tokens = line.split()
        if source_tag is not None and tokens:
            tokens = [source_tag.surface] + tokens
        try:
            hypotheses = translator.nbest(tokens)
        except ToolkitError as e:
            logger.warning(f"⚠️ Line {i + 1} failed to decode: {e}")
            errors += 1
            outputs.append("")
            nbest_lists.append([])
            continue
        outputs.append(render(hypotheses[0]))
        nbest_lists.append([(render(h), h) for h in hypotheses])

    write_lines(config.output, outputs)
    if config.nbest is not None:
        write_nbest(config.nbest, nbest_lists)
    logger.info(f"Decoded {len(outputs)} lines into {config.output} ({errors} errors)")
    return errors


@router.command("score", ScoreConfig)
def score(config: ScoreConfig):
    """Corpus BLEU of a hypothesis file, or a rescored n-best file, against one reference file."""
    if config.nbest is not None:
        hypotheses = rescore_nbest(read_nbest(config.nbest), config.length_reward)
        logger.info(f"Rescored {len(hypotheses)} n-best lists with length reward {config.length_reward}")
    else:
        hypotheses = read_lines(config.hyp)
    report = corpus_bleu(
        hypotheses, read_lines(config.ref), tokenize=config.tok,
        lowercase=config.lowercase, smooth=config.smooth,
    )
    print(round(report.score, 2))
    logger.info(report.to_text())
    if config.output is not None:
        Path(config.output).write_text(
            json.dumps(report.model_dump(), indent=2, sort_keys=True) + "\n", encoding="utf-8",
        )
