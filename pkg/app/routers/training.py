"""
Training command.
"""
import logging
from pathlib import Path

from app.config import derive_seed
from app.corpus import filter_by_length, load_parallel_prefix
from app.exceptions import CheckpointError
from app.routers import CommandRouter
from app.schemas.model import TrainHyperparams
from app.schemas.pipeline import TrainConfig
from app.training import encode_corpus, fit_corpus, train
from app.utils.checkpoint import CheckpointManager, load_checkpoint, save_checkpoint

logger = logging.getLogger(__name__)

router = CommandRouter(tags=["training"])


@router.command("train", TrainConfig)
def train_command(config: TrainConfig):
    """Train one model on a corpus written by tag/mix and save it with its vocabularies."""
    corpus = load_parallel_prefix(Path(config.prefix), config.source_lang, config.target_lang)
    corpus = filter_by_length(corpus, config.max_length)

    output = Path(config.output)
    checkpoint_dir = None
    if config.checkpoint_interval:
        checkpoint_dir = str(output.with_name(f"{output.stem}_steps"))
    hyperparams = TrainHyperparams(
        steps=config.steps,
        batch_size=config.batch_size,
        learning_rate=config.learning_rate,
        warmup_steps=config.warmup_steps,
        clip_norm=config.clip_norm,
        seed=derive_seed(config.seed, "train"),
        log_interval=config.log_interval,
        checkpoint_interval=config.checkpoint_interval,
        checkpoint_dir=checkpoint_dir,
        stop_at_loss=config.stop_at_loss,
    )
    latest = CheckpointManager(Path(checkpoint_dir)).latest() if config.resume else None
    if latest is not None:
        checkpoint = load_checkpoint(latest)
        if checkpoint.source_vocab is None or checkpoint.target_vocab is None:
            raise CheckpointError(f"{latest} carries no vocabularies to resume from")
        source_vocab, target_vocab = checkpoint.source_vocab, checkpoint.target_vocab
        logger.info(f"Resuming from {latest}")
        model, state = train(
            checkpoint.model, encode_corpus(corpus, source_vocab, target_vocab), hyperparams,
            source_vocab, target_vocab, checkpoint.train_state,
        )
    else:
        if config.resume:
            logger.warning(f"⚠️ No checkpoint in {checkpoint_dir}, training from scratch")
        model, state, source_vocab, target_vocab = fit_corpus(
            corpus, config, hyperparams, derive_seed(config.seed, "init"),
        )
    save_checkpoint(model, output, source_vocab, target_vocab, state)
    logger.info(f"Saved model to {output} (step {state.step}, loss {state.final_loss:.4f})")
