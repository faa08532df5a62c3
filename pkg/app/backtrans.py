"""
Back-translation with a domain-tagged noise generator.
Contract:
- The generator runs in the reverse of the final direction
- Its targets carry <clean_s>/<noisy_s>; decoding from <noisy_s> yields pseudo-noisy sources
- Synthetic pairs join the noisy domain in domain-sensitive assembly
"""
import logging
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import torch

from app.config import derive_seed
from app.corpus import (
    load_monolingual, load_parallel, mix, reverse_direction, tag_corpus, untag_corpus, write_parallel,
)
from app.decode import BeamHypothesis, EnsembleSpec, Translator
from app.evaluation import corpus_bleu
from app.exceptions import CheckpointError, DecodeError, DirectionMismatchError
from app.models import EOS_ID
from app.schemas.backtrans import BacktransPlan, BacktransResult, GeneratorTraining, SteeringConfig
from app.schemas.corpus import (
    CLEAN_SOURCE, CLEAN_TARGET, NOISY_SOURCE, NOISY_TARGET, Corpus, DomainKind, DomainTag,
    MixMode, MonoCorpus, Origin, Split, TaggedSentencePair,
)
from app.schemas.decode import DecodeConfig
from app.schemas.evaluation import SteeringReport
from app.schemas.model import TrainHyperparams
from app.subword import Vocabulary
from app.training import build_vocabularies, fit_corpus
from app.utils.checkpoint import load_checkpoint, save_checkpoint
from app.utils.synthetic import NoisyStyle, build_synthetic_data, in_style, style_transforms, translate_word

logger = logging.getLogger(__name__)

PROGRESS_INTERVAL = 1000


def _check_same_direction(*corpora: Corpus) -> None:
    direction = corpora[0].direction
    for corpus in corpora[1:]:
        if corpus.direction != direction:
            raise DirectionMismatchError(f"Expected {direction}, got {corpus.direction}")


def build_generator_corpus(clean: Corpus, noisy: Corpus, seed: int,
                           domain_sensitive: bool = True) -> Corpus:
    """
    Reverse both corpora and mark the target side: <clean_s> for clean pairs,
    <noisy_s> for noisy ones. domain_sensitive=False gives the tag-blind variant.
    """
    _check_same_direction(clean, noisy)
    reversed_clean = reverse_direction(clean)
    reversed_noisy = reverse_direction(noisy)
    if domain_sensitive:
        reversed_clean = tag_corpus(reversed_clean, CLEAN_TARGET)
        reversed_noisy = tag_corpus(reversed_noisy, NOISY_TARGET)
    generator_corpus = mix([reversed_clean, reversed_noisy], seed)
    logger.info(
        f"Generator corpus {generator_corpus.source_lang}->{generator_corpus.target_lang}: "
        f"{len(generator_corpus)} pairs (target tags: {domain_sensitive})"
    )
    return generator_corpus


def _sample_tokens(translator: Translator, tokens: Sequence[str], rng: torch.Generator) -> List[str]:
    ensemble = translator.ensemble
    encoded = ensemble.encode(translator.source_ids(tokens))
    limit = min(translator.config.length_cap(len(tokens)), ensemble.max_positions - 1)
    ids: List[int] = []
    for _ in range(limit):
        prefix = torch.tensor([[translator.start_id, *ids]], dtype=torch.long)
        probs = ensemble.next_probabilities(prefix, encoded)[0]
        token = int(torch.multinomial(probs, 1, generator=rng))
        ids.append(token)
        if token == EOS_ID:
            break
    return translator.to_tokens(BeamHypothesis(tuple(ids), 0.0, True))


def generate_pseudo_sources(generator: EnsembleSpec, mono: MonoCorpus, source_vocab: Vocabulary,
                            target_vocab: Vocabulary, tag: Optional[DomainTag] = NOISY_TARGET,
                            beam: int = 4, sample: bool = False, seed: int = 0,
                            max_len: int = 256) -> Corpus:
    """
    Decode every monolingual sentence from the requested start tag and pair the
    output with it in the final direction. Empty outputs are dropped and counted.
    """
    config = generator.members[0].config
    if mono.language != config.source_lang:
        raise DirectionMismatchError(
            f"Monolingual corpus is {mono.language!r}, generator reads {config.source_lang!r}"
        )
    translator = Translator(generator, source_vocab, target_vocab, tag,
                            DecodeConfig(beam_size=beam, max_len=max_len))
    rng = torch.Generator().manual_seed(seed)

    pairs: List[TaggedSentencePair] = []
    dropped = 0
    for i, sentence in enumerate(mono.sentences):
        try:
            if sample:
                pseudo = _sample_tokens(translator, sentence, rng)
            else:
                pseudo = translator.translate_tokens(sentence)
        except DecodeError as e:
            logger.warning(f"⚠️ Generation failed for sentence {i}: {e}")
            pseudo = []
        if not pseudo:
            dropped += 1
        else:
            pairs.append(TaggedSentencePair(
                tuple(pseudo), sentence, None, Origin.SYNTHETIC_BACKTRANSLATED, Split.TRAIN,
            ))
        if (i + 1) % PROGRESS_INTERVAL == 0:
            logger.info(f"Generated {i + 1}/{len(mono)} pseudo sources")

    if dropped:
        logger.warning(f"⚠️ Dropped {dropped} empty generator outputs")
    logger.info(f"Synthetic corpus: {len(pairs)} pairs from {len(mono)} monolingual sentences")
    return Corpus(tuple(pairs), config.target_lang, mono.language, dropped=dropped)


def assemble_training_set(clean: Corpus, noisy: Corpus, synthetic: Corpus, mode: MixMode,
                          seed: int) -> Corpus:
    """
    SENSITIVE: <clean> on clean pairs, <noisy> on noisy and synthetic pairs.
    INSENSITIVE: no tags. Either way the result is mixed with seed.
    """
    _check_same_direction(clean, noisy, synthetic)
    parts = [untag_corpus(clean), untag_corpus(noisy), untag_corpus(synthetic)]
    if mode == MixMode.SENSITIVE:
        parts = [
            tag_corpus(parts[0], CLEAN_SOURCE),
            tag_corpus(parts[1], NOISY_SOURCE),
            tag_corpus(parts[2], NOISY_SOURCE),
        ]
    assembled = mix(parts, seed)
    logger.info(
        f"Assembled {mode.value.lower()} training set: {len(clean)} clean + {len(noisy)} noisy "
        f"+ {len(synthetic)} synthetic = {len(assembled)}"
    )
    return assembled


def generator_hyperparams(config: GeneratorTraining, seed: int) -> TrainHyperparams:
    return TrainHyperparams(
        steps=config.steps, batch_size=config.batch_size, learning_rate=config.learning_rate,
        warmup_steps=config.warmup_steps, clip_norm=config.clip_norm, seed=seed,
        log_interval=config.log_interval,
    )


def run_backtranslation(plan: BacktransPlan) -> Tuple[Corpus, BacktransResult]:
    """Execute a plan file end to end and write the augmented corpus."""
    clean = load_parallel(plan.clean_source, plan.clean_target, Origin.CLEAN_PARALLEL,
                          plan.source_lang, plan.target_lang)
    noisy = load_parallel(plan.noisy_source, plan.noisy_target, Origin.NOISY_PARALLEL,
                          plan.source_lang, plan.target_lang)
    mono = load_monolingual(plan.mono, plan.target_lang)
    tagged = plan.generation_tag != "none"
    generator_corpus = build_generator_corpus(
        clean, noisy, derive_seed(plan.seed, "generator-mix"), domain_sensitive=tagged,
    )

    output_prefix = Path(plan.output_prefix)
    if plan.generator_checkpoint is not None:
        checkpoint = load_checkpoint(plan.generator_checkpoint)
        if checkpoint.source_vocab is None or checkpoint.target_vocab is None:
            raise CheckpointError(f"{plan.generator_checkpoint} carries no vocabularies")
        model, source_vocab, target_vocab = checkpoint.model, checkpoint.source_vocab, checkpoint.target_vocab
        generator_path = str(plan.generator_checkpoint)
    else:
        model, _, source_vocab, target_vocab = fit_corpus(
            generator_corpus, plan, generator_hyperparams(plan, derive_seed(plan.seed, "generator-train")),
            init_seed=derive_seed(plan.seed, "generator-init"),
        )
        generator_path = str(save_checkpoint(
            model, output_prefix.with_name("generator.pt"), source_vocab, target_vocab,
        ))

    tag = DomainTag.parse(plan.generation_tag, "target") if tagged else None
    synthetic = generate_pseudo_sources(
        EnsembleSpec([model]), mono, source_vocab, target_vocab, tag,
        beam=plan.beam, sample=plan.sample, seed=derive_seed(plan.seed, "sample"), max_len=plan.max_len,
    )
    augmented = assemble_training_set(clean, noisy, synthetic, plan.mode, derive_seed(plan.seed, "assemble"))
    files = write_parallel(augmented, output_prefix)

    result = BacktransResult(
        generator_pairs=len(generator_corpus),
        mono_sentences=len(mono),
        synthetic_kept=len(synthetic),
        synthetic_dropped=synthetic.dropped,
        clean_pairs=len(clean),
        noisy_pairs=len(noisy),
        augmented_pairs=len(augmented),
        output_files=[str(f) for f in files],
        generator_checkpoint=generator_path,
    )
    return augmented, result


def _match_fraction(outputs: Sequence[Sequence[str]], transform, empty_matches: bool = False) -> float:
    if not outputs:
        return 0.0
    return sum(1 for tokens in outputs if in_style(tokens, transform, empty_matches)) / len(outputs)


def run_tag_steering_experiment(config: SteeringConfig) -> SteeringReport:
    """
    Train a target-tagged generator and a tag-blind one on a corpus where both
    domains share sources but style their targets differently, then measure how
    often held-out decodes follow the requested style.
    """
    data = build_synthetic_data(
        derive_seed(config.seed, "steer-data"), lexicon_size=config.lexicon_size,
        clean_pairs=config.train_sources, noisy_pairs=config.train_sources, shared_sources=True,
        valid_pairs=0, test_pairs=0, mono_sentences=0, heldout=config.heldout,
        min_len=config.min_len, max_len=config.max_len, noisy_style=config.noisy_style,
    )
    transforms = style_transforms(config.noisy_style)
    # Only an identity noisy style makes an empty output a legitimate match
    empty_matches = config.noisy_style == NoisyStyle.IDENTITY
    mix_seed = derive_seed(config.seed, "steer-mix")
    tagged_corpus = build_generator_corpus(data.clean, data.noisy, mix_seed, domain_sensitive=True)
    source_vocab, target_vocab = build_vocabularies(tagged_corpus)
    hyperparams = generator_hyperparams(config, derive_seed(config.seed, "steer-train"))
    init_seed = derive_seed(config.seed, "steer-init")
    decode_config = DecodeConfig(beam_size=config.beam)

    model, state, _, _ = fit_corpus(tagged_corpus, config, hyperparams, init_seed, source_vocab, target_vocab)
    heldout = list(data.heldout)
    references = [
        " ".join(transforms[DomainKind.NOISY](translate_word(w)) for w in sentence) for sentence in heldout
    ]

    tagged_match = {}
    tagged_outputs = {}
    for tag in (CLEAN_TARGET, NOISY_TARGET):
        translator = Translator(EnsembleSpec([model]), source_vocab, target_vocab, tag, decode_config)
        outputs = [translator.translate_tokens(sentence) for sentence in heldout]
        tagged_outputs[tag.surface] = outputs
        tagged_match[tag.surface] = _match_fraction(outputs, transforms[tag.kind], empty_matches)
    tagged_bleu = corpus_bleu([" ".join(o) for o in tagged_outputs[NOISY_TARGET.surface]], references).score

    report = SteeringReport(
        heldout=len(heldout),
        mixing_ratio=len(data.noisy) / (len(data.clean) + len(data.noisy)),
        tagged_match=tagged_match,
        blind_match={},
        tagged_noisy_bleu=tagged_bleu,
        tagged_final_loss=state.final_loss,
    )

    blind_outputs: List[List[str]] = []
    if config.train_blind:
        blind_corpus = build_generator_corpus(data.clean, data.noisy, mix_seed, domain_sensitive=False)
        blind_model, blind_state, _, _ = fit_corpus(
            blind_corpus, config, hyperparams, init_seed, source_vocab, target_vocab,
        )
        blind = Translator(EnsembleSpec([blind_model]), source_vocab, target_vocab, None, decode_config)
        if config.blind_sample:
            rng = torch.Generator().manual_seed(derive_seed(config.seed, "steer-blind"))
            blind_outputs = [_sample_tokens(blind, sentence, rng) for sentence in heldout]
        else:
            blind_outputs = [blind.translate_tokens(sentence) for sentence in heldout]
        report.blind_match = {
            kind.value.lower(): _match_fraction(blind_outputs, transforms[kind], empty_matches)
            for kind in DomainKind
        }
        report.blind_noisy_bleu = corpus_bleu([" ".join(o) for o in blind_outputs], references).score
        report.blind_final_loss = blind_state.final_loss

    for i, sentence in enumerate(heldout[:3]):
        sample = {"source": " ".join(sentence)}
        for surface, outputs in tagged_outputs.items():
            sample[surface] = " ".join(outputs[i])
        if blind_outputs:
            sample["blind"] = " ".join(blind_outputs[i])
        report.samples.append(sample)

    logger.info(f"Tag steering: {report.to_text().strip()}")
    if config.output_dir is not None:
        out = Path(config.output_dir)
        out.mkdir(parents=True, exist_ok=True)
        (out / "steering.txt").write_text(report.to_text(), encoding="utf-8")
        (out / "steering.json").write_text(report.model_dump_json(indent=2), encoding="utf-8")
    return report
