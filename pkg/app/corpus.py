"""
Corpus operations: load, validate, tag, reverse, filter, mix and count.
Contract: every operation returns a new immutable corpus; removals are counted,
never silent.
"""
import logging
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.exceptions import (
    AlignmentError, ContaminationError, DirectionMismatchError, TagInvariantError,
)
from app.schemas.corpus import (
    RESERVED_TOKENS, Corpus, DomainTag, MonoCorpus, Origin, Split, StatsReport,
    TaggedSentencePair, TagSide, Tokens,
)

logger = logging.getLogger(__name__)

_RESERVED = frozenset(RESERVED_TOKENS)
HISTOGRAM_BUCKET = 16

# Published dataset sizes, per origin and split (monolingual listed separately)
DATASET_TABLES: Dict[str, Dict[str, int]] = {
    "en2fr": {
        "CLEAN_PARALLEL.TRAIN": 2_207_962,
        "NOISY_PARALLEL.TRAIN": 36_058,
        "NOISY_PARALLEL.VALID": 852,
        "NOISY_PARALLEL.TEST": 1_020,
        "MONOLINGUAL": 26_485,
    },
    "fr2en": {
        "CLEAN_PARALLEL.TRAIN": 2_207_962,
        "NOISY_PARALLEL.TRAIN": 19_161,
        "NOISY_PARALLEL.VALID": 886,
        "NOISY_PARALLEL.TEST": 1_022,
        "MONOLINGUAL": 2_244_020,
    },
}


def _read_lines(path: Path) -> List[str]:
    with open(path, "r", encoding="utf-8", newline="\n") as f:
        return [line.rstrip("\n").rstrip("\r") for line in f]


def _check_clean(tokens: Sequence[str], path: Path, line_no: int) -> None:
    for token in tokens:
        if token in _RESERVED:
            raise ContaminationError(f"Reserved token {token!r} in {path}:{line_no}")


def load_parallel(source_path: Path, target_path: Path, origin: Origin,
                  source_lang: str = "src", target_lang: str = "tgt",
                  split: Split = Split.TRAIN) -> Corpus:
    """
    Pair line i of each file. Lines empty on either side are dropped and
    counted in Corpus.dropped.
    """
    source_lines = _read_lines(Path(source_path))
    target_lines = _read_lines(Path(target_path))
    if len(source_lines) != len(target_lines):
        raise AlignmentError(
            f"Line count mismatch: {source_path} has {len(source_lines)}, "
            f"{target_path} has {len(target_lines)}"
        )

    pairs = []
    dropped = 0
    for line_no, (src_line, tgt_line) in enumerate(zip(source_lines, target_lines), start=1):
        src = src_line.split()
        tgt = tgt_line.split()
        if not src or not tgt:
            dropped += 1
            continue
        _check_clean(src, source_path, line_no)
        _check_clean(tgt, target_path, line_no)
        pairs.append(TaggedSentencePair(src, tgt, None, origin, split))

    if dropped:
        logger.warning(f"Dropped {dropped} blank-sided lines from {source_path}")
    logger.info(f"Loaded {len(pairs)} {origin.value} pairs ({split.value}) from {source_path}")
    return Corpus(tuple(pairs), source_lang, target_lang, dropped=dropped)


def load_monolingual(path: Path, language: str) -> MonoCorpus:
    """Blank lines dropped, order preserved."""
    path = Path(path)
    sentences = []
    dropped = 0
    for line_no, line in enumerate(_read_lines(path), start=1):
        tokens = line.split()
        if not tokens:
            dropped += 1
            continue
        _check_clean(tokens, path, line_no)
        sentences.append(tuple(tokens))
    logger.info(f"Loaded {len(sentences)} {language} monolingual sentences from {path}")
    return MonoCorpus(tuple(sentences), language, dropped=dropped)


def tag_pair(pair: TaggedSentencePair, tag: DomainTag) -> TaggedSentencePair:
    """Insert the tag at position 0 of its side. The tag is that side's start symbol."""
    if pair.tag is not None:
        raise TagInvariantError(f"Pair already tagged with {pair.tag.surface}")
    if tag.side == TagSide.SOURCE_START:
        return TaggedSentencePair((tag.surface,) + pair.source, pair.target, tag, pair.origin, pair.split)
    return TaggedSentencePair(pair.source, (tag.surface,) + pair.target, tag, pair.origin, pair.split)


def untag_pair(pair: TaggedSentencePair) -> TaggedSentencePair:
    if pair.tag is None:
        return pair
    return TaggedSentencePair(pair.source_content, pair.target_content, None, pair.origin, pair.split)


def tag_corpus(corpus: Corpus, tag: DomainTag) -> Corpus:
    return Corpus(tuple(tag_pair(p, tag) for p in corpus), corpus.source_lang, corpus.target_lang)


def untag_corpus(corpus: Corpus) -> Corpus:
    return Corpus(tuple(untag_pair(p) for p in corpus), corpus.source_lang, corpus.target_lang)


def reverse_direction(corpus: Corpus) -> Corpus:
    """Swap sides and direction labels; tags are removed, re-tag after reversal."""
    pairs = tuple(
        TaggedSentencePair(p.target_content, p.source_content, None, p.origin, p.split)
        for p in corpus
    )
    return Corpus(pairs, corpus.target_lang, corpus.source_lang)


def filter_by_length(corpus: Corpus, max_len: int = 256) -> Corpus:
    """Keep pairs with both sides <= max_len units, tag excluded."""
    kept = tuple(
        p for p in corpus
        if len(p.source_content) <= max_len and len(p.target_content) <= max_len
    )
    removed = len(corpus) - len(kept)
    if removed:
        logger.info(f"Length filter (>{max_len}) removed {removed} of {len(corpus)} pairs")
    return Corpus(kept, corpus.source_lang, corpus.target_lang, dropped=removed)


def _resample(n: int, ratio: float, rng: np.random.Generator) -> np.ndarray:
    target = int(round(n * ratio))
    whole, rest = divmod(target, n) if n else (0, 0)
    parts = [np.arange(n)] * whole
    if rest:
        parts.append(np.sort(rng.choice(n, size=rest, replace=False)))
    return np.concatenate(parts) if parts else np.zeros(0, dtype=np.int64)


def mix(corpora: Sequence[Corpus], seed: int,
        ratios: Optional[Sequence[float]] = None) -> Corpus:
    """
    Concatenate then shuffle deterministically from seed.
    ratios (off by default) up/down-samples each input before concatenation.
    """
    if not corpora:
        raise DirectionMismatchError("mix() needs at least one corpus")
    direction = corpora[0].direction
    for corpus in corpora[1:]:
        if corpus.direction != direction:
            raise DirectionMismatchError(f"Cannot mix {corpus.direction} into {direction}")

    rng = np.random.default_rng(seed)
    pool: List[TaggedSentencePair] = []
    for i, corpus in enumerate(corpora):
        if ratios is None or ratios[i] == 1.0:
            pool.extend(corpus.pairs)
        else:
            indices = _resample(len(corpus), ratios[i], rng)
            pool.extend(corpus.pairs[int(j)] for j in indices)

    order = rng.permutation(len(pool))
    mixed = tuple(pool[int(j)] for j in order)
    logger.info(f"Mixed {len(corpora)} corpora into {len(mixed)} pairs (seed={seed})")
    return Corpus(mixed, direction[0], direction[1])


def corpus_stats(corpus: Optional[Corpus], monolingual: Optional[MonoCorpus] = None) -> StatsReport:
    """Exact counts per origin and split, plus a source-length histogram."""
    counts: Dict[Origin, Dict[Split, int]] = {o: {s: 0 for s in Split} for o in Origin}
    histogram: Dict[str, int] = {}
    pairs = corpus.pairs if corpus is not None else ()
    for pair in pairs:
        counts[pair.origin][pair.split] += 1
        low = (len(pair.source_content) // HISTOGRAM_BUCKET) * HISTOGRAM_BUCKET
        bucket = f"{low}-{low + HISTOGRAM_BUCKET - 1}"
        histogram[bucket] = histogram.get(bucket, 0) + 1
    ordered = dict(sorted(histogram.items(), key=lambda kv: int(kv[0].split("-")[0])))
    return StatsReport(
        counts=counts,
        monolingual=len(monolingual) if monolingual is not None else 0,
        length_histogram=ordered,
        total=len(pairs),
        dropped=corpus.dropped if corpus is not None else 0,
    )


def verify_counts(report: StatsReport, expected: Dict[str, int]) -> Dict[str, Tuple[int, int]]:
    """Return {key: (expected, actual)} for every mismatching row."""
    mismatches = {}
    for key, want in expected.items():
        if key == "MONOLINGUAL":
            got = report.monolingual
        else:
            origin, split = key.split(".")
            got = report.count(Origin(origin), Split(split))
        if got != want:
            mismatches[key] = (want, got)
    return mismatches


def tokens_to_text(tokens: Tokens) -> str:
    return " ".join(tokens)


def write_parallel(corpus: Corpus, prefix: Path) -> Tuple[Path, Path, Path]:
    """
    Write prefix.<src>, prefix.<tgt> and prefix.origin (one origin label per line).
    Tags are written as part of the text.
    """
    prefix = Path(prefix)
    prefix.parent.mkdir(parents=True, exist_ok=True)
    src_path = prefix.with_name(f"{prefix.name}.{corpus.source_lang}")
    tgt_path = prefix.with_name(f"{prefix.name}.{corpus.target_lang}")
    origin_path = prefix.with_name(f"{prefix.name}.origin")
    with open(src_path, "w", encoding="utf-8", newline="\n") as fs, \
            open(tgt_path, "w", encoding="utf-8", newline="\n") as ft, \
            open(origin_path, "w", encoding="utf-8", newline="\n") as fo:
        for pair in corpus:
            fs.write(tokens_to_text(pair.source) + "\n")
            ft.write(tokens_to_text(pair.target) + "\n")
            fo.write(f"{pair.origin.value}\t{pair.split.value}\n")
    logger.info(f"Wrote {len(corpus)} pairs to {prefix}.*")
    return src_path, tgt_path, origin_path


def load_parallel_prefix(prefix: Path, source_lang: str, target_lang: str,
                         origin: Origin = Origin.CLEAN_PARALLEL,
                         split: Split = Split.TRAIN) -> Corpus:
    """
    Read a corpus written by write_parallel. Leading tag tokens are restored as
    tags; the .origin sidecar, when present, overrides origin and split.
    """
    prefix = Path(prefix)
    src_path = prefix.with_name(f"{prefix.name}.{source_lang}")
    tgt_path = prefix.with_name(f"{prefix.name}.{target_lang}")
    origin_path = prefix.with_name(f"{prefix.name}.origin")
    source_lines = _read_lines(src_path)
    target_lines = _read_lines(tgt_path)
    if len(source_lines) != len(target_lines):
        raise AlignmentError(f"Line count mismatch between {src_path} and {tgt_path}")
    labels = _read_lines(origin_path) if origin_path.exists() else []
    if labels and len(labels) != len(source_lines):
        raise AlignmentError(f"{origin_path} does not align with {src_path}")

    pairs = []
    dropped = 0
    for i, (src_line, tgt_line) in enumerate(zip(source_lines, target_lines)):
        src, tgt = tuple(src_line.split()), tuple(tgt_line.split())
        if not src or not tgt:
            dropped += 1
            continue
        pair_origin, pair_split = origin, split
        if labels:
            fields = labels[i].split("\t")
            pair_origin = Origin(fields[0])
            if len(fields) > 1:
                pair_split = Split(fields[1])
        tag = None
        for tokens in (src, tgt):
            if tokens[0] in RESERVED_TOKENS[4:]:
                tag = DomainTag.from_surface(tokens[0])
        pairs.append(TaggedSentencePair(src, tgt, tag, pair_origin, pair_split))
    return Corpus(tuple(pairs), source_lang, target_lang, dropped=dropped)
