"""
Synthetic bilingual corpora for desk-scale experiments.
A target-language word w translates to its reversal; the CLEAN domain keeps
source text lowercase, the NOISY domain applies a fixed style transform to it.
"""
from dataclasses import dataclass
from enum import Enum
from typing import Callable, Dict, List, Sequence, Tuple

import numpy as np

from app.schemas.corpus import (
    Corpus, DomainKind, MonoCorpus, Origin, Split, TaggedSentencePair, Tokens,
)

LETTERS = "abcdefghijklmnoprstuvw"


class NoisyStyle(str, Enum):
    UPPER = "upper"
    IDENTITY = "identity"  # degenerate: both domains identical


STYLE_TRANSFORMS: Dict[NoisyStyle, Callable[[str], str]] = {
    NoisyStyle.UPPER: str.upper,
    NoisyStyle.IDENTITY: lambda token: token,
}


def style_transforms(noisy_style: NoisyStyle) -> Dict[DomainKind, Callable[[str], str]]:
    return {DomainKind.CLEAN: str.lower, DomainKind.NOISY: STYLE_TRANSFORMS[noisy_style]}


def in_style(tokens: Sequence[str], transform: Callable[[str], str], empty_matches: bool = False) -> bool:
    """Every token is a fixed point of the transform. An empty output only matches when empty_matches is set."""
    if not tokens:
        return empty_matches
    return all(token == transform(token) for token in tokens)


def pseudo_lexicon(size: int, rng: np.random.Generator, min_chars: int = 3,
                   max_chars: int = 6) -> List[str]:
    words = set()
    while len(words) < size:
        n = int(rng.integers(min_chars, max_chars + 1))
        words.add("".join(LETTERS[int(i)] for i in rng.integers(0, len(LETTERS), size=n)))
    return sorted(words)


def translate_word(word: str) -> str:
    return word[::-1]


def sample_sentences(lexicon: Sequence[str], count: int, rng: np.random.Generator,
                     min_len: int = 3, max_len: int = 6) -> List[Tokens]:
    sentences = []
    for _ in range(count):
        n = int(rng.integers(min_len, max_len + 1))
        sentences.append(tuple(lexicon[int(i)] for i in rng.integers(0, len(lexicon), size=n)))
    return sentences


@dataclass(frozen=True)
class SyntheticData:
    """Final-direction corpora: source is the (possibly noisy) translation, target the original words."""
    clean: Corpus
    noisy: Corpus
    noisy_valid: Corpus
    noisy_test: Corpus
    mono: MonoCorpus
    heldout: Tuple[Tokens, ...]  # target-language sentences never seen in training


def _pairs(sentences: Sequence[Tokens], transform: Callable[[str], str], origin: Origin,
           split: Split) -> Tuple[TaggedSentencePair, ...]:
    return tuple(
        TaggedSentencePair(tuple(transform(translate_word(w)) for w in s), s, None, origin, split)
        for s in sentences
    )


def build_synthetic_data(seed: int, lexicon_size: int = 40, clean_pairs: int = 400,
                         noisy_pairs: int = 400, shared_sources: bool = True,
                         valid_pairs: int = 50, test_pairs: int = 100, mono_sentences: int = 400,
                         heldout: int = 200, min_len: int = 3, max_len: int = 6,
                         noisy_style: NoisyStyle = NoisyStyle.UPPER,
                         source_lang: str = "fr", target_lang: str = "en") -> SyntheticData:
    """
    With shared_sources the noisy corpus reuses the clean corpus sentences, so
    both domains map identical inputs to differently styled outputs.
    """
    rng = np.random.default_rng(seed)
    lexicon = pseudo_lexicon(lexicon_size, rng)
    transforms = style_transforms(noisy_style)

    clean_sents = sample_sentences(lexicon, clean_pairs, rng, min_len, max_len)
    if shared_sources:
        noisy_sents = clean_sents[:noisy_pairs]
    else:
        noisy_sents = sample_sentences(lexicon, noisy_pairs, rng, min_len, max_len)
    valid_sents = sample_sentences(lexicon, valid_pairs, rng, min_len, max_len)
    test_sents = sample_sentences(lexicon, test_pairs, rng, min_len, max_len)
    mono_sents = sample_sentences(lexicon, mono_sentences, rng, min_len, max_len)
    heldout_sents = sample_sentences(lexicon, heldout, rng, min_len, max_len)

    clean_fn, noisy_fn = transforms[DomainKind.CLEAN], transforms[DomainKind.NOISY]
    return SyntheticData(
        clean=Corpus(_pairs(clean_sents, clean_fn, Origin.CLEAN_PARALLEL, Split.TRAIN), source_lang, target_lang),
        noisy=Corpus(_pairs(noisy_sents, noisy_fn, Origin.NOISY_PARALLEL, Split.TRAIN), source_lang, target_lang),
        noisy_valid=Corpus(_pairs(valid_sents, noisy_fn, Origin.NOISY_PARALLEL, Split.VALID), source_lang, target_lang),
        noisy_test=Corpus(_pairs(test_sents, noisy_fn, Origin.NOISY_PARALLEL, Split.TEST), source_lang, target_lang),
        mono=MonoCorpus(tuple(mono_sents), target_lang),
        heldout=tuple(heldout_sents),
    )
