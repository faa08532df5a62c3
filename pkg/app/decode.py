"""
Beam search over one model or an ensemble.
Contract:
- Ensemble members are averaged per step in probability space
- Hypothesis score = sum of log-probabilities + length_reward * generated tokens (EOS counted)
- Finished hypotheses stay in the beam as incumbents and are never expanded
"""
import logging
from dataclasses import dataclass, replace
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import torch

from app.exceptions import DecodeError, EmptyInputError, TagMismatchError
from app.models import BOS_ID, EOS_ID, Seq2SeqTransformer, TokenDistribution
from app.schemas.corpus import RESERVED_TOKENS, DomainTag, TagSide
from app.schemas.decode import DecodeConfig
from app.subword import Vocabulary
from app.utils.checkpoint import load_checkpoint

logger = logging.getLogger(__name__)

_RESERVED = frozenset(RESERVED_TOKENS)


@dataclass(frozen=True)
class BeamHypothesis:
    token_ids: Tuple[int, ...]  # generated ids, start symbol excluded
    logprob: float
    finished: bool = False

    @property
    def length(self) -> int:
        return len(self.token_ids)

    def score(self, length_reward: float = 0.0) -> float:
        return self.logprob + length_reward * self.length


def _rank_key(length_reward: float):
    return lambda h: (-h.score(length_reward), h.length, h.token_ids)


def average_probabilities(stacked: torch.Tensor) -> torch.Tensor:
    """Arithmetic mean over the leading (member) dimension."""
    if stacked.size(0) == 1:
        return stacked[0]
    return stacked.mean(dim=0)


def ensemble_step(member_distributions: Sequence[TokenDistribution]) -> TokenDistribution:
    if not member_distributions:
        raise EmptyInputError("ensemble_step needs at least one distribution")
    sizes = {d.probabilities.numel() for d in member_distributions}
    if len(sizes) != 1:
        raise ValueError(f"Distribution lengths differ: {sorted(sizes)}")
    stacked = torch.stack([d.probabilities.double() for d in member_distributions])
    return TokenDistribution(average_probabilities(stacked), member_distributions[0].position)


class EnsembleSpec:
    """N >= 1 models sharing a target vocabulary and a tag convention."""

    def __init__(self, members: Sequence[Seq2SeqTransformer]):
        if not members:
            raise EmptyInputError("An ensemble needs at least one member")
        first = members[0].config
        for member in members[1:]:
            c = member.config
            if (c.target_vocab_size, c.source_vocab_size) != (first.target_vocab_size, first.source_vocab_size):
                raise DecodeError("Ensemble members have different vocabulary sizes")
            if (c.target_tags, c.source_tags) != (first.target_tags, first.source_tags):
                raise TagMismatchError("Ensemble members were trained with different tag conventions")
        self.members = list(members)
        for member in self.members:
            member.eval()

    def __len__(self) -> int:
        return len(self.members)

    @property
    def target_tags(self) -> bool:
        return self.members[0].config.target_tags

    @property
    def source_tags(self) -> bool:
        return self.members[0].config.source_tags

    @property
    def source_vocab_size(self) -> int:
        return self.members[0].config.source_vocab_size

    @property
    def target_vocab_size(self) -> int:
        return self.members[0].config.target_vocab_size

    @property
    def max_positions(self) -> int:
        return min(m.config.max_positions for m in self.members)

    def encode(self, source_ids: Sequence[int]) -> List[Tuple[torch.Tensor, torch.Tensor]]:
        if len(source_ids) == 0:
            raise DecodeError("Empty source sentence")
        if len(source_ids) > self.max_positions:
            raise DecodeError(f"Source length {len(source_ids)} exceeds {self.max_positions} positions")
        if max(source_ids) >= self.source_vocab_size or min(source_ids) < 0:
            raise DecodeError("Source id out of vocabulary range")
        src = torch.tensor([list(source_ids)], dtype=torch.long)
        with torch.no_grad():
            return [(m.encode(src), m.source_mask(src)) for m in self.members]

    def next_probabilities(self, prefixes: torch.Tensor,
                           encoded: List[Tuple[torch.Tensor, torch.Tensor]]) -> torch.Tensor:
        """[rows, t] prefixes -> [rows, V] averaged next-token probabilities (float64)."""
        rows = prefixes.size(0)
        per_member = []
        with torch.no_grad():
            for member, (memory, blocked) in zip(self.members, encoded):
                logits = member.decode(
                    prefixes,
                    memory.expand(rows, -1, -1),
                    blocked.expand(rows, -1, -1),
                )[:, -1]
                per_member.append(torch.softmax(logits.double(), dim=-1))
        return average_probabilities(torch.stack(per_member))


def _length_limit(ensemble: EnsembleSpec, max_len: int) -> int:
    return max(1, min(max_len, ensemble.max_positions - 1))


def greedy_decode(ensemble: EnsembleSpec, source_ids: Sequence[int], start_id: int = BOS_ID,
                  max_len: int = 256) -> BeamHypothesis:
    encoded = ensemble.encode(source_ids)
    tokens: List[int] = []
    logprob = 0.0
    for _ in range(_length_limit(ensemble, max_len)):
        prefix = torch.tensor([[start_id] + tokens], dtype=torch.long)
        logp = torch.log(ensemble.next_probabilities(prefix, encoded)[0])
        best = torch.topk(logp, 1)
        token = int(best.indices[0])
        tokens.append(token)
        logprob += float(best.values[0])
        if token == EOS_ID:
            return BeamHypothesis(tuple(tokens), logprob, True)
    return BeamHypothesis(tuple(tokens), logprob, True)


def beam_search_nbest(ensemble: EnsembleSpec, source_ids: Sequence[int], start_id: int = BOS_ID,
                      beam_size: int = 4, length_reward: float = 0.0,
                      max_len: int = 256) -> List[BeamHypothesis]:
    """The final beam, best first. Hypotheses cut at max_len count as finished."""
    if beam_size < 1:
        raise ValueError("beam_size must be >= 1")
    encoded = ensemble.encode(source_ids)
    key = _rank_key(length_reward)
    beams = [BeamHypothesis((), 0.0, False)]

    for _ in range(_length_limit(ensemble, max_len)):
        active = [h for h in beams if not h.finished]
        if not active:
            break
        prefixes = torch.tensor([[start_id, *h.token_ids] for h in active], dtype=torch.long)
        logp = torch.log(ensemble.next_probabilities(prefixes, encoded))
        k = min(beam_size, logp.size(-1))
        top = torch.topk(logp, k, dim=-1)

        candidates = [h for h in beams if h.finished]
        for row, hyp in enumerate(active):
            for value, token in zip(top.values[row].tolist(), top.indices[row].tolist()):
                if value == float("-inf"):
                    continue
                candidates.append(
                    BeamHypothesis(hyp.token_ids + (token,), hyp.logprob + value, token == EOS_ID)
                )
        candidates.sort(key=key)
        beams = candidates[:beam_size]

    beams = [h if h.finished else replace(h, finished=True) for h in beams]
    return sorted(beams, key=key)


def beam_search(ensemble: EnsembleSpec, source_ids: Sequence[int], start_id: int = BOS_ID,
                beam_size: int = 4, length_reward: float = 0.0, max_len: int = 256) -> BeamHypothesis:
    return beam_search_nbest(ensemble, source_ids, start_id, beam_size, length_reward, max_len)[0]


def rescore(hypotheses: Sequence[BeamHypothesis], length_reward: float) -> BeamHypothesis:
    """Best by logp + reward * length; ties go to the shorter, then lexicographically smaller ids."""
    if not hypotheses:
        raise EmptyInputError("Cannot rescore an empty n-best list")
    return min(hypotheses, key=_rank_key(length_reward))



def rescore_nbest(nbest_lists: Sequence[Sequence[Tuple[str, BeamHypothesis]]],
                  length_reward: float) -> List[str]:
    """Text of the best entry of each list; an empty list gives an empty line."""
    outputs = []
    for entries in nbest_lists:
        if not entries:
            outputs.append("")
            continue
        best = rescore([hyp for _, hyp in entries], length_reward)
        outputs.append(next(text for text, hyp in entries if hyp is best))
    return outputs


class Translator:
    """Ensemble plus vocabularies and the start symbol; turns token lists into token lists."""

    def __init__(self, ensemble: EnsembleSpec, source_vocab: Vocabulary, target_vocab: Vocabulary,
                 start_tag: Optional[DomainTag] = None, config: Optional[DecodeConfig] = None):
        if ensemble.target_tags and start_tag is None:
            raise TagMismatchError("Model was trained with target tags; a start tag is required")
        if start_tag is not None:
            if not ensemble.target_tags:
                raise TagMismatchError(
                    f"Start tag {start_tag.surface} requested but the model was trained without target tags"
                )
            if start_tag.side != TagSide.TARGET_START:
                raise TagMismatchError(f"{start_tag.surface} is not a target-side tag")
        if len(target_vocab) != ensemble.target_vocab_size or len(source_vocab) != ensemble.source_vocab_size:
            raise DecodeError("Vocabulary sizes do not match the model")
        self.ensemble = ensemble
        self.source_vocab = source_vocab
        self.target_vocab = target_vocab
        self.start_tag = start_tag
        self.config = config or DecodeConfig()

    @classmethod
    def from_checkpoints(cls, paths: Sequence[Path], start_tag: Optional[DomainTag] = None,
                         config: Optional[DecodeConfig] = None) -> "Translator":
        checkpoints = [load_checkpoint(Path(p)) for p in paths]
        if not checkpoints:
            raise EmptyInputError("No checkpoints given")
        first = checkpoints[0]
        if first.source_vocab is None or first.target_vocab is None:
            raise DecodeError(f"{paths[0]} carries no vocabularies")
        for ckpt in checkpoints[1:]:
            if ckpt.target_vocab is None or ckpt.target_vocab.tokens != first.target_vocab.tokens:
                raise DecodeError(f"{ckpt.path} has a different target vocabulary")
        logger.info(f"Loaded ensemble of {len(checkpoints)} checkpoint(s)")
        return cls(EnsembleSpec([c.model for c in checkpoints]), first.source_vocab,
                   first.target_vocab, start_tag, config)

    @property
    def start_id(self) -> int:
        if self.start_tag is None:
            return BOS_ID
        return self.target_vocab.index[self.start_tag.surface]

    def source_ids(self, tokens: Sequence[str]) -> List[int]:
        if not tokens:
            raise DecodeError("Empty source sentence")
        return self.source_vocab.encode(tokens) + [EOS_ID]

    def nbest(self, tokens: Sequence[str]) -> List[BeamHypothesis]:
        c = self.config
        return beam_search_nbest(
            self.ensemble, self.source_ids(tokens), self.start_id,
            c.beam_size, c.length_reward, c.length_cap(len(tokens)),
        )

    def translate(self, tokens: Sequence[str]) -> BeamHypothesis:
        return self.nbest(tokens)[0]

    def to_tokens(self, hypothesis: BeamHypothesis) -> List[str]:
        """Surface tokens, EOS and any reserved symbol removed."""
        return [t for t in self.target_vocab.decode(hypothesis.token_ids) if t not in _RESERVED]

    def translate_tokens(self, tokens: Sequence[str]) -> List[str]:
        return self.to_tokens(self.translate(tokens))


def write_nbest(path: Path, nbest_lists: Sequence[Sequence[Tuple[str, BeamHypothesis]]]) -> Path:
    """One line per hypothesis: "index ||| text ||| logp ||| length"."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        for index, entries in enumerate(nbest_lists):
            for text, hyp in entries:
                f.write(f"{index} ||| {text} ||| {hyp.logprob:.6f} ||| {hyp.length}\n")
    return path


def read_nbest(path: Path) -> List[List[Tuple[str, BeamHypothesis]]]:
    """Hypotheses read back carry no token ids; rescoring uses logp and length only."""
    lists: List[List[Tuple[str, BeamHypothesis]]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            if not line.strip():
                continue
            index, text, logp, length = [part.strip() for part in line.rstrip("\n").split("|||")]
            while len(lists) <= int(index):
                lists.append([])
            placeholder = tuple(range(int(length)))
            lists[int(index)].append((text, BeamHypothesis(placeholder, float(logp), True)))
    return lists
