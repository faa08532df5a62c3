"""
Training operations for the translation network.
- Deterministic initialization from config.seed
- Per-position forward pass and label-smoothed loss
- Batched training: Adam with inverse-sqrt warmup, clipping, checkpoints
- Central-difference gradient check in double precision
"""
import bisect
import copy
import hashlib
import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, List, Optional, Sequence, Tuple

import torch
import torch.nn as nn
import torch.nn.functional as F
from torch.optim.lr_scheduler import LambdaLR

from app.exceptions import DecodeError, DivergenceError, EmptyInputError, NonFiniteError
from app.models import BOS_ID, EOS_ID, PAD_ID, Seq2SeqTransformer, TokenDistribution
from app.schemas.corpus import Corpus, TaggedSentencePair
from app.schemas.model import Architecture, ModelConfig, TrainHyperparams, TrainState
from app.subword import Vocabulary
from app.utils.checkpoint import CheckpointManager

logger = logging.getLogger(__name__)

# (source ids ending in EOS, target ids: start symbol + content + EOS)
Example = Tuple[List[int], List[int]]


@dataclass
class Batch:
    source: torch.Tensor
    target_in: torch.Tensor
    target_out: torch.Tensor

    def __len__(self) -> int:
        return self.source.size(0)


def init_model(config: ModelConfig) -> Seq2SeqTransformer:
    """Same config (seed included) gives bit-identical parameters."""
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(config.seed)
        model = Seq2SeqTransformer(config)
        for name, param in model.named_parameters():
            if "embedding" in name:
                nn.init.normal_(param, mean=0.0, std=config.d_model ** -0.5)
            elif param.dim() > 1:
                nn.init.xavier_uniform_(param)
            elif name.endswith("bias"):
                nn.init.zeros_(param)
    logger.debug(f"Initialized model with seed {config.seed}")
    return model


def parameter_checksum(model: nn.Module) -> str:
    digest = hashlib.sha256()
    for name, tensor in model.state_dict().items():
        digest.update(name.encode("utf-8"))
        digest.update(tensor.detach().cpu().contiguous().numpy().tobytes())
    return digest.hexdigest()


def encode_pair(pair: TaggedSentencePair, source_vocab: Vocabulary,
                target_vocab: Vocabulary) -> Example:
    """A target-side tag replaces the begin symbol; a source-side tag stays token 0."""
    source_ids = source_vocab.encode(pair.source) + [EOS_ID]
    if pair.tagged_side == "target":
        start = target_vocab.index[pair.tag.surface]
    else:
        start = BOS_ID
    return source_ids, [start] + target_vocab.encode(pair.target_content) + [EOS_ID]


def encode_corpus(corpus: Corpus, source_vocab: Vocabulary,
                  target_vocab: Vocabulary) -> List[Example]:
    return [encode_pair(pair, source_vocab, target_vocab) for pair in corpus]


def _pad(rows: Sequence[Sequence[int]]) -> torch.Tensor:
    width = max(len(row) for row in rows)
    out = torch.full((len(rows), width), PAD_ID, dtype=torch.long)
    for i, row in enumerate(rows):
        out[i, :len(row)] = torch.tensor(row, dtype=torch.long)
    return out


def collate(examples: Sequence[Example]) -> Batch:
    if not examples:
        raise EmptyInputError("Cannot build a batch from zero examples")
    source = _pad([src for src, _ in examples])
    target = _pad([tgt for _, tgt in examples])
    return Batch(source, target[:, :-1], target[:, 1:])


def batch_loss(model: Seq2SeqTransformer, batch: Batch, smoothing: float) -> torch.Tensor:
    """Token-level mean of label-smoothed cross-entropy, padding ignored."""
    logits = model(batch.source, batch.target_in)
    return F.cross_entropy(
        logits.reshape(-1, logits.size(-1)),
        batch.target_out.reshape(-1),
        ignore_index=PAD_ID,
        label_smoothing=smoothing,
    )


def _check_ids(ids: Sequence[int], vocab_size: int, max_positions: int, side: str) -> None:
    if len(ids) == 0:
        raise DecodeError(f"Empty {side} sequence")
    if len(ids) > max_positions:
        raise DecodeError(f"{side} length {len(ids)} exceeds max positions {max_positions}")
    for i in ids:
        if i < 0 or i >= vocab_size:
            raise DecodeError(f"{side} id {i} out of range [0, {vocab_size})")


def forward(model: Seq2SeqTransformer, source_ids: Sequence[int],
            target_prefix_ids: Sequence[int]) -> List[TokenDistribution]:
    """
    One distribution per prefix position; entry t predicts the token after
    prefix[:t + 1]. Runs in eval mode, softmax taken in double precision.
    """
    config = model.config
    _check_ids(source_ids, config.source_vocab_size, config.max_positions, "source")
    _check_ids(target_prefix_ids, config.target_vocab_size, config.max_positions, "target")

    was_training = model.training
    model.eval()
    try:
        with torch.no_grad():
            src = torch.tensor([list(source_ids)], dtype=torch.long)
            tgt = torch.tensor([list(target_prefix_ids)], dtype=torch.long)
            probs = torch.softmax(model(src, tgt)[0].double(), dim=-1)
    finally:
        model.train(was_training)
    return [TokenDistribution(probs[t], t + 1) for t in range(probs.size(0))]


def loss(distributions: Sequence[TokenDistribution], reference_ids: Sequence[int],
         smoothing: float = 0.0, pad_id: int = PAD_ID) -> float:
    """
    Mean over non-padding positions of -sum_v q(v) log p(v), where
    q = (1 - smoothing) * onehot(reference) + smoothing / V.
    """
    if len(distributions) != len(reference_ids):
        raise ValueError(
            f"{len(distributions)} distributions but {len(reference_ids)} reference ids"
        )
    total = 0.0
    counted = 0
    for dist, ref in zip(distributions, reference_ids):
        if ref == pad_id:
            continue
        p = dist.probabilities.double()
        q = torch.full_like(p, smoothing / p.numel())
        q[ref] += 1.0 - smoothing
        total += float(-torch.special.xlogy(q, p).sum())
        counted += 1
    if counted == 0:
        raise EmptyInputError("No non-padding positions to score")
    return total / counted


def gradient_check(model: Seq2SeqTransformer, examples: Sequence[Example],
                   epsilon: float = 1e-5, num_coords: int = 200, seed: int = 0,
                   floor: float = 1e-5, smoothing: Optional[float] = None) -> float:
    """
    Worst relative error |a - n| / max(floor, |a| + |n|) between backprop
    gradients and central differences over a seeded sample of coordinates.
    Works on a double-precision eval-mode copy; the model passed in is untouched.
    """
    if not examples:
        raise EmptyInputError("gradient_check needs at least one example")
    checked = copy.deepcopy(model).double().eval()
    batch = collate(examples)
    smoothing = checked.config.label_smoothing if smoothing is None else smoothing

    params = [p for p in checked.parameters() if p.requires_grad]
    checked.zero_grad()
    value = batch_loss(checked, batch, smoothing)
    if not torch.isfinite(value):
        raise NonFiniteError(f"Loss is not finite: {float(value)}")
    value.backward()
    grads = torch.cat([
        (p.grad if p.grad is not None else torch.zeros_like(p)).reshape(-1) for p in params
    ])
    if not torch.isfinite(grads).all():
        raise NonFiniteError("Analytic gradient has non-finite entries")

    offsets = [0]
    for p in params:
        offsets.append(offsets[-1] + p.numel())
    generator = torch.Generator().manual_seed(seed)
    coords = torch.randperm(offsets[-1], generator=generator)[:num_coords].tolist()

    worst = 0.0
    with torch.no_grad():
        for coord in coords:
            k = bisect.bisect_right(offsets, coord) - 1
            flat = params[k].view(-1)
            j = coord - offsets[k]
            original = float(flat[j])
            flat[j] = original + epsilon
            plus = float(batch_loss(checked, batch, smoothing))
            flat[j] = original - epsilon
            minus = float(batch_loss(checked, batch, smoothing))
            flat[j] = original
            numeric = (plus - minus) / (2.0 * epsilon)
            analytic = float(grads[coord])
            if not math.isfinite(numeric):
                raise NonFiniteError(f"Finite difference is not finite at coordinate {coord}")
            rel = abs(analytic - numeric) / max(floor, abs(analytic) + abs(numeric))
            worst = max(worst, rel)
    logger.info(f"Gradient check over {len(coords)} coordinates: max relative error {worst:.3e}")
    return worst


def inverse_sqrt_factor(step: int, warmup_steps: int) -> float:
    """Linear warmup to 1.0 at warmup_steps, then decay with 1/sqrt(step)."""
    s = step + 1
    return min(s / warmup_steps, math.sqrt(warmup_steps / s))


def _batch_indices(n: int, batch_size: int, generator: torch.Generator) -> Iterator[List[int]]:
    """Endless epochs; order of each epoch drawn from the seeded generator."""
    while True:
        order = torch.randperm(n, generator=generator).tolist()
        for start in range(0, n, batch_size):
            yield order[start:start + batch_size]


def train(model: Seq2SeqTransformer, examples: Sequence[Example], hyperparams: TrainHyperparams,
          source_vocab: Optional[Vocabulary] = None, target_vocab: Optional[Vocabulary] = None,
          state: Optional[TrainState] = None) -> Tuple[Seq2SeqTransformer, TrainState]:
    """
    Train in place and return (model, state). A non-finite loss restores the
    last good weights and raises DivergenceError naming the last checkpoint.
    """
    hp = hyperparams
    state = state or TrainState()
    if hp.steps == 0 or state.step >= hp.steps:
        return model, state
    if not examples:
        raise EmptyInputError("Cannot train on an empty corpus")
    if hp.deterministic:
        torch.set_num_threads(1)

    optimizer = torch.optim.Adam(
        model.parameters(), lr=hp.learning_rate, betas=(hp.beta1, hp.beta2), eps=hp.adam_eps,
    )
    scheduler = LambdaLR(optimizer, lambda s: inverse_sqrt_factor(s, hp.warmup_steps))
    if state.optimizer_state:
        optimizer.load_state_dict(state.optimizer_state)
    if state.scheduler_state:
        scheduler.load_state_dict(state.scheduler_state)

    manager = CheckpointManager(Path(hp.checkpoint_dir)) if hp.checkpoint_dir else None
    generator = torch.Generator().manual_seed(hp.seed)
    batches = _batch_indices(len(examples), hp.batch_size, generator)
    for _ in range(state.step):
        next(batches)

    smoothing = model.config.label_smoothing
    good_weights = copy.deepcopy(model.state_dict())
    last_checkpoint: Optional[str] = state.checkpoints[-1] if state.checkpoints else None

    def snapshot_state() -> None:
        state.optimizer_state = optimizer.state_dict()
        state.scheduler_state = scheduler.state_dict()

    def checkpoint(step: int) -> None:
        nonlocal last_checkpoint
        snapshot_state()
        path = manager.save(model, step, state, source_vocab, target_vocab)
        last_checkpoint = str(path)
        state.checkpoints.append(last_checkpoint)

    logger.info(f"Training for {hp.steps - state.step} steps on {len(examples)} examples")
    model.train()
    with torch.random.fork_rng(devices=[]):
        torch.manual_seed(hp.seed)
        for step in range(state.step + 1, hp.steps + 1):
            batch = collate([examples[i] for i in next(batches)])
            optimizer.zero_grad()
            value = batch_loss(model, batch, smoothing)
            loss_value = float(value)
            if not math.isfinite(loss_value):
                model.load_state_dict(good_weights)
                logger.error(f"Non-finite loss at step {step}; restored last good weights")
                raise DivergenceError(
                    f"Training diverged at step {step}", step=step, last_checkpoint=last_checkpoint,
                )
            value.backward()
            if hp.clip_norm:
                torch.nn.utils.clip_grad_norm_(model.parameters(), hp.clip_norm)
            optimizer.step()
            scheduler.step()

            state.step = step
            state.loss_curve.append((step, loss_value))
            if step % hp.log_interval == 0:
                if all(torch.isfinite(p).all() for p in model.parameters()):
                    good_weights = copy.deepcopy(model.state_dict())
                logger.info(
                    f"step {step}/{hp.steps} loss {loss_value:.4f} lr {scheduler.get_last_lr()[0]:.2e}"
                )
            if manager and hp.checkpoint_interval and step % hp.checkpoint_interval == 0:
                checkpoint(step)
            if hp.stop_at_loss is not None and loss_value < hp.stop_at_loss:
                logger.info(f"Loss {loss_value:.4f} below {hp.stop_at_loss} at step {step}, stopping")
                break

    snapshot_state()
    if manager and str(manager.path_for(state.step)) != last_checkpoint:
        checkpoint(state.step)
    model.eval()
    logger.info(f"Training finished at step {state.step}, final loss {state.final_loss:.4f}")
    return model, state


def build_vocabularies(corpus: Corpus) -> Tuple[Vocabulary, Vocabulary]:
    """Source and target vocabularies over the corpus units, tags excluded."""
    return (
        Vocabulary.from_sentences(p.source_content for p in corpus),
        Vocabulary.from_sentences(p.target_content for p in corpus),
    )


def config_for(corpus: Corpus, source_vocab: Vocabulary, target_vocab: Vocabulary,
               architecture: Architecture, seed: int) -> ModelConfig:
    """Model config for a corpus; target_tags and source_tags follow how the corpus is tagged."""
    return ModelConfig(
        source_vocab_size=len(source_vocab),
        target_vocab_size=len(target_vocab),
        seed=seed,
        source_lang=corpus.source_lang,
        target_lang=corpus.target_lang,
        target_tags=any(p.tagged_side == "target" for p in corpus),
        source_tags=any(p.tagged_side == "source" for p in corpus),
        **architecture.architecture(),
    )


def fit_corpus(corpus: Corpus, architecture: Architecture, hyperparams: TrainHyperparams,
               init_seed: int, source_vocab: Optional[Vocabulary] = None,
               target_vocab: Optional[Vocabulary] = None):
    """
    Initialize and train a model on a tagged or untagged corpus.
    Returns (model, state, source_vocab, target_vocab).
    """
    if len(corpus) == 0:
        raise EmptyInputError("Cannot fit a model on an empty corpus")
    if source_vocab is None or target_vocab is None:
        source_vocab, target_vocab = build_vocabularies(corpus)
    config = config_for(corpus, source_vocab, target_vocab, architecture, init_seed)
    model = init_model(config)
    examples = encode_corpus(corpus, source_vocab, target_vocab)
    model, state = train(model, examples, hyperparams, source_vocab, target_vocab)
    return model, state, source_vocab, target_vocab
