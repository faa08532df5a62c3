"""
Data commands: subword learning/application, tagging, mixing, counting.
"""
import logging
from pathlib import Path

from app.corpus import (
    DATASET_TABLES, corpus_stats, load_monolingual, load_parallel, load_parallel_prefix, mix,
    tag_corpus, verify_counts, write_parallel,
)
from app.exceptions import ConfigError
from app.routers import CommandRouter
from app.schemas.corpus import DomainTag
from app.schemas.pipeline import BpeApplyConfig, BpeLearnConfig, MixConfig, StatsConfig, TagConfig
from app.subword import SubwordModel, apply_bpe, learn_bpe

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["data"])


def _read_tokenized(path: Path):
    with open(path, "r", encoding="utf-8") as f:
        return [line.split() for line in f]


# ====================
# SUBWORDS
# ====================

@router.command("bpe-learn", BpeLearnConfig)
def bpe_learn(config: BpeLearnConfig):
    """Learn BPE merges from tokenized text files."""
    sentences = []
    for path in config.input:
        sentences.extend(s for s in _read_tokenized(path) if s)
    model = learn_bpe(sentences, config.merges)
    model.save(config.merges_out, config.vocab_out)
    logger.info(f"Learned {len(model.merges)} merges, vocabulary of {len(model.vocabulary)}")


@router.command("bpe-apply", BpeApplyConfig)
def bpe_apply(config: BpeApplyConfig):
    """Segment a tokenized file with learned merges."""
    model = SubwordModel.load(config.merges, config.vocab)
    Path(config.output).parent.mkdir(parents=True, exist_ok=True)
    with open(config.output, "w", encoding="utf-8", newline="\n") as out:
        for tokens in _read_tokenized(config.input):
            out.write(" ".join(apply_bpe(model, tokens)) + "\n")
    logger.info(f"Segmented {config.input} -> {config.output}")


# ====================
# CORPORA
# ====================

@router.command("tag", TagConfig)
def tag(config: TagConfig):
    """Put a domain tag at the start of every pair's source or target side."""
    try:
        domain_tag = DomainTag.parse(config.tag, config.side)
    except ValueError as e:
        raise ConfigError(f"Invalid value for 'tag': {config.tag}", key="tag") from e
    corpus = load_parallel(config.source, config.target, config.origin,
                           config.source_lang, config.target_lang, config.split)
    write_parallel(tag_corpus(corpus, domain_tag), config.output_prefix)
    logger.info(f"Tagged {len(corpus)} pairs with {domain_tag.surface}")


@router.command("mix", MixConfig)
def mix_command(config: MixConfig):
    """Concatenate corpora written by tag/mix and shuffle them with a seed."""
    corpora = [
        load_parallel_prefix(Path(prefix), config.source_lang, config.target_lang)
        for prefix in config.prefixes
    ]
    write_parallel(mix(corpora, config.seed, config.ratios), config.output_prefix)


@router.command("stats", StatsConfig)
def stats(config: StatsConfig):
    """Count pairs per origin and split; optionally check published dataset sizes."""
    corpus = None
    if config.prefix is not None:
        corpus = load_parallel_prefix(Path(config.prefix), config.source_lang, config.target_lang,
                                      config.origin, config.split)
    elif config.source is not None and config.target is not None:
        corpus = load_parallel(config.source, config.target, config.origin,
                               config.source_lang, config.target_lang, config.split)
    mono = load_monolingual(config.mono, config.target_lang) if config.mono is not None else None
    report = corpus_stats(corpus, mono)
    text = report.to_text()
    if config.output is not None:
        Path(config.output).write_text(text, encoding="utf-8")
    else:
        print(text, end="")

    if config.dataset is None:
        return 0
    if config.dataset not in DATASET_TABLES:
        raise ConfigError(f"Invalid value for 'dataset': {config.dataset}", key="dataset")
    expected = {
        key: n for key, n in DATASET_TABLES[config.dataset].items()
        if (key == "MONOLINGUAL" and mono is not None) or (key != "MONOLINGUAL" and corpus is not None)
    }
    mismatches = verify_counts(report, expected)
    for key, (want, got) in mismatches.items():
        logger.error(f"❌ {key}: expected {want}, found {got}")
    return len(mismatches)
