"""
Subword segmentation and text processing.
- Byte-pair encoding with a total tie-break order (reproducible learning)
- "@@" continuation marker, merge file layout of the reference BPE tooling
- Moses normalization/tokenization/detokenization via sacremoses
- sacreBLEU international tokenization for scoring
"""
import heapq
import logging
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Tuple, Union

from sacrebleu.tokenizers.tokenizer_intl import TokenizerV14International
from sacremoses import MosesDetokenizer, MosesPunctNormalizer, MosesTokenizer

from app.exceptions import ContaminationError, EmptyInputError
from app.schemas.corpus import RESERVED_TOKENS, UNK, Corpus, MonoCorpus, TaggedSentencePair

logger = logging.getLogger(__name__)

CONTINUATION = "@@"
END_OF_WORD = "</w>"
MERGES_HEADER = "#version: 0.2"

_RESERVED = frozenset(RESERVED_TOKENS)

Pair = Tuple[str, str]


class Vocabulary:
    """Token <-> id map. Reserved tokens always hold ids 0..7."""

    def __init__(self, tokens: Sequence[str]):
        if tuple(tokens[:len(RESERVED_TOKENS)]) != RESERVED_TOKENS:
            raise ValueError("Vocabulary must start with the reserved tokens")
        self.tokens: List[str] = list(tokens)
        self.index: Dict[str, int] = {token: i for i, token in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("Duplicate symbols in vocabulary")
        self.unk_id = self.index[UNK]

    @classmethod
    def build(cls, symbols: Iterable[str]) -> "Vocabulary":
        seen = dict.fromkeys(RESERVED_TOKENS)
        for symbol in symbols:
            if symbol not in seen:
                seen[symbol] = None
        return cls(list(seen))

    @classmethod
    def from_sentences(cls, sentences: Iterable[Sequence[str]]) -> "Vocabulary":
        """Word-level vocabulary, symbols sorted for a stable id assignment."""
        symbols = sorted({tok for sentence in sentences for tok in sentence} - _RESERVED)
        return cls.build(symbols)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.index

    def encode(self, tokens: Sequence[str]) -> List[int]:
        return [self.index.get(token, self.unk_id) for token in tokens]

    def decode(self, ids: Sequence[int]) -> List[str]:
        return [self.tokens[i] for i in ids]

    def save(self, path: Path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as f:
            for i, token in enumerate(self.tokens):
                f.write(f"{token}\t{i}\n")

    @classmethod
    def load(cls, path: Path) -> "Vocabulary":
        entries = []
        with open(path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line:
                    continue
                symbol, idx = line.rsplit("\t", 1)
                entries.append((int(idx), symbol))
        entries.sort()
        if [i for i, _ in entries] != list(range(len(entries))):
            raise ValueError(f"Vocabulary ids in {path} are not contiguous")
        return cls([symbol for _, symbol in entries])


# Literal "@" is escaped so that no final piece can end in the continuation marker
_ESCAPES = (("&", "&amp;"), ("@", "&#64;"))


def _escape(word: str) -> str:
    for char, entity in _ESCAPES:
        word = word.replace(char, entity)
    return word


def _unescape(word: str) -> str:
    for char, entity in reversed(_ESCAPES):
        word = word.replace(entity, char)
    return word


def _word_symbols(word: str) -> Tuple[str, ...]:
    word = _escape(word)
    return tuple(word[:-1]) + (word[-1] + END_OF_WORD,)


def _merge_symbols(symbols: Tuple[str, ...], pair: Pair) -> Tuple[str, ...]:
    merged = []
    i = 0
    while i < len(symbols):
        if i < len(symbols) - 1 and symbols[i] == pair[0] and symbols[i + 1] == pair[1]:
            merged.append(pair[0] + pair[1])
            i += 2
        else:
            merged.append(symbols[i])
            i += 1
    return tuple(merged)


def _surface(symbol: str, final: bool) -> str:
    if final:
        return symbol[: -len(END_OF_WORD)]
    return symbol + CONTINUATION


@dataclass
class SubwordModel:
    merges: List[Pair]
    vocabulary: Vocabulary
    marker: str = CONTINUATION
    reserved: Tuple[str, ...] = RESERVED_TOKENS
    _ranks: Dict[Pair, int] = field(default_factory=dict, init=False, repr=False)
    _cache: Dict[str, Tuple[str, ...]] = field(default_factory=dict, init=False, repr=False)

    def __post_init__(self):
        self._ranks = {pair: rank for rank, pair in enumerate(self.merges)}

    def segment_word(self, word: str) -> Tuple[str, ...]:
        cached = self._cache.get(word)
        if cached is not None:
            return cached
        symbols = _word_symbols(word)
        while len(symbols) > 1:
            ranked = [
                (self._ranks.get(pair, len(self._ranks)), pair)
                for pair in zip(symbols, symbols[1:])
            ]
            rank, pair = min(ranked)
            if rank == len(self._ranks):
                break
            symbols = _merge_symbols(symbols, pair)
        surfaces = tuple(
            _surface(symbol, i == len(symbols) - 1) for i, symbol in enumerate(symbols)
        )
        surfaces = tuple(
            UNK if (s in _RESERVED or s not in self.vocabulary) else s for s in surfaces
        )
        self._cache[word] = surfaces
        return surfaces

    def save(self, merges_path: Path, vocab_path: Path) -> None:
        with open(merges_path, "w", encoding="utf-8", newline="\n") as f:
            f.write(MERGES_HEADER + "\n")
            for left, right in self.merges:
                f.write(f"{left} {right}\n")
        self.vocabulary.save(vocab_path)
        logger.info(f"Saved {len(self.merges)} merges to {merges_path}")

    @classmethod
    def load(cls, merges_path: Path, vocab_path: Path) -> "SubwordModel":
        merges = []
        with open(merges_path, "r", encoding="utf-8") as f:
            for line in f:
                line = line.rstrip("\n")
                if not line or line.startswith("#version"):
                    continue
                left, right = line.split(" ")
                merges.append((left, right))
        return cls(merges, Vocabulary.load(vocab_path))


def _derive_vocabulary(alphabet: Iterable[str], merges: Sequence[Pair]) -> Vocabulary:
    symbols = []
    for char in sorted(alphabet):
        symbols.extend([char + CONTINUATION, char])
    for left, right in merges:
        merged = left + right
        final = merged.endswith(END_OF_WORD)
        symbols.append(_surface(merged, final))
    return Vocabulary.build(s for s in symbols if s not in _RESERVED)


def learn_bpe(corpus: Iterable[Union[str, Sequence[str]]], num_merges: int) -> SubwordModel:
    """
    Repeatedly merge the most frequent adjacent symbol pair.
    Ties go to the lexicographically smallest pair; stops early once no pair
    occurs at least twice.
    """
    if num_merges < 0:
        raise ValueError("num_merges must be >= 0")
    word_freq: Counter = Counter()
    for sentence in corpus:
        words = sentence.split() if isinstance(sentence, str) else sentence
        word_freq.update(words)
    if not word_freq:
        raise EmptyInputError("Cannot learn BPE from an empty corpus")
    contaminated = _RESERVED.intersection(word_freq)
    if contaminated:
        raise ContaminationError(f"Reserved tokens in BPE training data: {sorted(contaminated)}")

    alphabet = {char for word in word_freq for char in _escape(word)}
    words: List[Tuple[Tuple[str, ...], int]] = [
        (_word_symbols(word), freq) for word, freq in sorted(word_freq.items())
    ]

    stats: Counter = Counter()
    where: Dict[Pair, set] = defaultdict(set)
    for idx, (symbols, freq) in enumerate(words):
        for pair in zip(symbols, symbols[1:]):
            stats[pair] += freq
            where[pair].add(idx)
    heap = [(-count, pair) for pair, count in stats.items()]
    heapq.heapify(heap)

    merges: List[Pair] = []
    while len(merges) < num_merges:
        best = None
        while heap:
            neg_count, pair = heapq.heappop(heap)
            if stats.get(pair, 0) == -neg_count and neg_count < 0:
                best = (pair, -neg_count)
                break
        if best is None or best[1] < 2:
            break
        pair = best[0]
        merges.append(pair)

        touched = set()
        for idx in sorted(where.pop(pair, ())):
            symbols, freq = words[idx]
            old_pairs = list(zip(symbols, symbols[1:]))
            if pair not in old_pairs:
                continue
            new_symbols = _merge_symbols(symbols, pair)
            for old in old_pairs:
                stats[old] -= freq
                touched.add(old)
            for new in zip(new_symbols, new_symbols[1:]):
                stats[new] += freq
                where[new].add(idx)
                touched.add(new)
            words[idx] = (new_symbols, freq)
        for changed in touched:
            if stats[changed] > 0:
                heapq.heappush(heap, (-stats[changed], changed))
            else:
                stats.pop(changed, None)

    if len(merges) < num_merges:
        logger.info(f"BPE stopped early at {len(merges)} of {num_merges} merges")
    return SubwordModel(merges, _derive_vocabulary(alphabet, merges))


def apply_bpe(model: SubwordModel, sentence: Sequence[str]) -> List[str]:
    segmented: List[str] = []
    for word in sentence:
        segmented.extend(model.segment_word(word))
    return segmented


def decode_bpe(tokens: Sequence[str]) -> str:
    """Join subwords on the continuation marker and unescape; reserved tokens are dropped."""
    words = []
    current = ""
    for token in tokens:
        if token in _RESERVED:
            continue
        if token.endswith(CONTINUATION):
            current += token[: -len(CONTINUATION)]
        else:
            words.append(_unescape(current + token))
            current = ""
    if current:
        words.append(_unescape(current))
    return " ".join(words)


@lru_cache(maxsize=None)
def _normalizer(lang: str) -> MosesPunctNormalizer:
    return MosesPunctNormalizer(lang=lang)


@lru_cache(maxsize=None)
def _tokenizer(lang: str) -> MosesTokenizer:
    return MosesTokenizer(lang=lang)


@lru_cache(maxsize=None)
def _detokenizer(lang: str) -> MosesDetokenizer:
    return MosesDetokenizer(lang=lang)


_intl = TokenizerV14International()


_GUILLEMET_PADDING = re.compile(r"(«)\s+|\s+(»)")


def normalize(text: str, lang: str = "en") -> str:
    """Guillemet padding removed, Moses punctuation normalization, then whitespace collapse."""
    text = _GUILLEMET_PADDING.sub(lambda m: m.group(1) or m.group(2), text)
    return " ".join(_normalizer(lang).normalize(text).split())


def moses_tokenize(text: str, lang: str = "en") -> List[str]:
    if not text.strip():
        return []
    return _tokenizer(lang).tokenize(text, escape=False)


def detokenize(tokens: Sequence[str], lang: str = "en") -> str:
    if not tokens:
        return ""
    return _detokenizer(lang).detokenize(list(tokens))


def intl_tokenize(text: str) -> List[str]:
    """sacreBLEU 'intl' tokenization."""
    return _intl(text).split()


def segment_corpus(corpus: Corpus, source_model: SubwordModel, target_model: SubwordModel) -> Corpus:
    """Segment both sides; a tag stays a single unit at position 0."""
    pairs = []
    for pair in corpus:
        source = apply_bpe(source_model, pair.source_content)
        target = apply_bpe(target_model, pair.target_content)
        if pair.tagged_side == "source":
            source = [pair.tag.surface] + source
        elif pair.tagged_side == "target":
            target = [pair.tag.surface] + target
        pairs.append(TaggedSentencePair(tuple(source), tuple(target), pair.tag, pair.origin, pair.split))
    return Corpus(tuple(pairs), corpus.source_lang, corpus.target_lang, dropped=corpus.dropped)


def segment_mono(mono: MonoCorpus, model: SubwordModel) -> MonoCorpus:
    return MonoCorpus(tuple(tuple(apply_bpe(model, s)) for s in mono.sentences), mono.language, mono.dropped)
