"""
End-to-end comparison of mixing strategies on noisy test data.
Rows:
1. domain-insensitive mix of clean and noisy data
2. the same plus pseudo-noisy data from a tag-blind generator
3. domain-sensitive mix (source tags)
4. the same plus pseudo-noisy data from the <noisy_s> generator
5. row 4 as an ensemble of independently initialized models
"""
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

from app.backtrans import (
    assemble_training_set, build_generator_corpus, generate_pseudo_sources, generator_hyperparams,
)
from app.config import derive_seed
from app.corpus import filter_by_length, load_monolingual, load_parallel, tag_corpus
from app.decode import EnsembleSpec, Translator
from app.evaluation import evaluate_system, raw_references, tune_length_reward
from app.exceptions import EmptyInputError
from app.models import Seq2SeqTransformer
from app.schemas.corpus import (
    NOISY_SOURCE, NOISY_TARGET, Corpus, MixMode, MonoCorpus, Origin, Split, TaggedSentencePair,
)
from app.schemas.decode import DecodeConfig
from app.schemas.evaluation import PIPELINE_ORDER, ComparisonRow, ComparisonTable
from app.schemas.model import TrainHyperparams
from app.schemas.pipeline import PipelineConfig
from app.subword import (
    SubwordModel, Vocabulary, learn_bpe, moses_tokenize, normalize, segment_corpus, segment_mono,
)
from app.training import fit_corpus
from app.utils.checkpoint import save_checkpoint
from app.utils.reports import ReportWriter
from app.utils.synthetic import build_synthetic_data

logger = logging.getLogger(__name__)

ROW_NAMES = (
    "Domain insensitive",
    "Domain insensitive + back translation",
    "Domain sensitive",
    "Domain sensitive + noisy back translation",
    "+ ensemble",
)


@dataclass
class ExperimentData:
    clean: Corpus
    noisy: Corpus
    test: Corpus
    mono: MonoCorpus
    valid: Optional[Corpus] = None
    source_bpe: Optional[SubwordModel] = None
    target_bpe: Optional[SubwordModel] = None
    # Detokenized targets captured before segmentation
    test_references: Optional[List[str]] = None
    valid_references: Optional[List[str]] = None


def _retokenize(corpus: Corpus) -> Corpus:
    pairs = []
    dropped = 0
    for p in corpus:
        src = moses_tokenize(normalize(" ".join(p.source), corpus.source_lang), corpus.source_lang)
        tgt = moses_tokenize(normalize(" ".join(p.target), corpus.target_lang), corpus.target_lang)
        if not src or not tgt:
            dropped += 1
            continue
        pairs.append(TaggedSentencePair(tuple(src), tuple(tgt), None, p.origin, p.split))
    return Corpus(tuple(pairs), corpus.source_lang, corpus.target_lang, dropped=corpus.dropped + dropped)


def load_data(config: PipelineConfig) -> ExperimentData:
    if config.synthetic:
        synthetic = build_synthetic_data(
            derive_seed(config.seed, "data"), lexicon_size=config.lexicon_size,
            clean_pairs=config.synthetic_clean, noisy_pairs=config.synthetic_noisy,
            shared_sources=False, valid_pairs=config.synthetic_valid,
            test_pairs=config.synthetic_test, mono_sentences=config.synthetic_mono, heldout=0,
            source_lang=config.source_lang, target_lang=config.target_lang,
        )
        valid = synthetic.noisy_valid if len(synthetic.noisy_valid) else None
        return ExperimentData(synthetic.clean, synthetic.noisy, synthetic.noisy_test, synthetic.mono, valid)

    langs = (config.source_lang, config.target_lang)
    clean = load_parallel(config.clean_source, config.clean_target, Origin.CLEAN_PARALLEL, *langs)
    noisy = load_parallel(config.noisy_source, config.noisy_target, Origin.NOISY_PARALLEL, *langs)
    test = load_parallel(config.test_source, config.test_target, Origin.NOISY_PARALLEL, *langs, split=Split.TEST)
    valid = None
    if config.valid_source is not None and config.valid_target is not None:
        valid = load_parallel(config.valid_source, config.valid_target, Origin.NOISY_PARALLEL, *langs,
                              split=Split.VALID)
    mono = load_monolingual(config.mono, config.target_lang)
    if config.moses_tokenize:
        clean, noisy, test = _retokenize(clean), _retokenize(noisy), _retokenize(test)
        valid = _retokenize(valid) if valid is not None else None
        mono = MonoCorpus(
            tuple(s for s in (tuple(moses_tokenize(normalize(" ".join(m), mono.language), mono.language))
                              for m in mono.sentences) if s),
            mono.language,
        )
    return ExperimentData(clean, noisy, test, mono, valid)


def segment_data(data: ExperimentData, merges: int, max_length: int) -> ExperimentData:
    """Learn one BPE model per side on training text, segment, filter training pairs by length."""
    source_bpe = learn_bpe([p.source_content for p in (*data.clean, *data.noisy)], merges)
    target_bpe = learn_bpe(
        [p.target_content for p in (*data.clean, *data.noisy)] + list(data.mono.sentences), merges,
    )
    segment = lambda corpus: segment_corpus(corpus, source_bpe, target_bpe)
    return ExperimentData(
        clean=filter_by_length(segment(data.clean), max_length),
        noisy=filter_by_length(segment(data.noisy), max_length),
        test=segment(data.test),
        mono=segment_mono(data.mono, target_bpe),
        valid=segment(data.valid) if data.valid is not None else None,
        source_bpe=source_bpe,
        target_bpe=target_bpe,
        test_references=raw_references(data.test),
        valid_references=raw_references(data.valid) if data.valid is not None else None,
    )


def _evaluate(name: str, stem: str, members: Sequence[Seq2SeqTransformer], source_vocab: Vocabulary,
              target_vocab: Vocabulary, mode: MixMode, data: ExperimentData,
              config: PipelineConfig, writer: ReportWriter) -> Tuple[float, float, int]:
    prepare = (lambda c: tag_corpus(c, NOISY_SOURCE)) if mode == MixMode.SENSITIVE else (lambda c: c)
    translator = Translator(
        EnsembleSpec(list(members)), source_vocab, target_vocab, None,
        DecodeConfig(beam_size=config.beam_size, length_reward=config.length_reward, max_len=config.max_length),
    )
    if config.tune_length_reward and data.valid is not None:
        reward, _ = tune_length_reward(translator, prepare(data.valid), references=data.valid_references)
        translator.config = translator.config.model_copy(update={"length_reward": reward})
    report = evaluate_system(
        translator, prepare(data.test), hyp_path=Path(config.output_dir) / f"{stem}.hyp", name=name,
        references=data.test_references,
    )
    writer.write_system(report, config.output_dir, stem)
    return report.bleu.score, report.bleu_cased.score, len(report.errors)


def run_experiment(config: PipelineConfig) -> ComparisonTable:
    out = Path(config.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    writer = ReportWriter()
    seed = config.seed

    data = segment_data(load_data(config), config.bpe_merges, config.max_length)
    if len(data.test) == 0:
        raise EmptyInputError("Experiment needs a non-empty test set")
    logger.info(
        f"Data: {len(data.clean)} clean, {len(data.noisy)} noisy, {len(data.mono)} monolingual, "
        f"{len(data.test)} test"
    )

    generator_hp = generator_hyperparams(config, derive_seed(seed, "generator-train"))
    if config.generator_steps is not None:
        generator_hp = generator_hp.model_copy(update={"steps": config.generator_steps})
    synthetic = {}
    for tagged in (False, True):
        label = "tagged" if tagged else "blind"
        generator_corpus = build_generator_corpus(
            data.clean, data.noisy, derive_seed(seed, "generator-mix"), domain_sensitive=tagged,
        )
        generator, _, gen_source_vocab, gen_target_vocab = fit_corpus(
            generator_corpus, config, generator_hp, derive_seed(seed, f"generator-init-{label}"),
        )
        save_checkpoint(generator, out / f"generator_{label}.pt", gen_source_vocab, gen_target_vocab)
        synthetic[tagged] = generate_pseudo_sources(
            EnsembleSpec([generator]), data.mono, gen_source_vocab, gen_target_vocab,
            NOISY_TARGET if tagged else None, beam=config.beam_size,
            seed=derive_seed(seed, f"sample-{label}"), max_len=config.max_length,
        )

    final_hp = TrainHyperparams(
        steps=config.steps, batch_size=config.batch_size, learning_rate=config.learning_rate,
        warmup_steps=config.warmup_steps, clip_norm=config.clip_norm,
        seed=derive_seed(seed, "final-train"), log_interval=config.log_interval,
    )
    empty = Corpus.empty(data.clean.source_lang, data.clean.target_lang)
    systems = (
        (MixMode.INSENSITIVE, empty),
        (MixMode.INSENSITIVE, synthetic[False]),
        (MixMode.SENSITIVE, empty),
        (MixMode.SENSITIVE, synthetic[True]),
    )

    table = ComparisonTable(notes=[
        f"Preprocessing before scoring: {PIPELINE_ORDER}. BLEU is lowercased, BLEU-cased is case-sensitive.",
        "Desk-scale run; scores compare the systems with each other only.",
    ])
    for i, (mode, synthetic_part) in enumerate(systems):
        name = ROW_NAMES[i]
        logger.info(f"System {i + 1}: {name}")
        train_set = assemble_training_set(
            data.clean, data.noisy, synthetic_part, mode, derive_seed(seed, f"assemble-{i}"),
        )
        model, state, source_vocab, target_vocab = fit_corpus(
            train_set, config, final_hp, derive_seed(seed, "final-init"),
        )
        save_checkpoint(model, out / f"system{i + 1}.pt", source_vocab, target_vocab, state)
        bleu, bleu_cased, errors = _evaluate(
            name, f"system{i + 1}", [model], source_vocab, target_vocab, mode, data, config, writer,
        )
        table.rows.append(ComparisonRow(
            method=name, bleu=bleu, bleu_cased=bleu_cased, training_pairs=len(train_set),
            synthetic_pairs=len(synthetic_part), errors=errors,
        ))

    members: List[Seq2SeqTransformer] = [model]
    for k in range(1, config.ensemble_size):
        member_hp = final_hp.model_copy(update={"seed": derive_seed(seed, f"final-train-{k}")})
        member, member_state, _, _ = fit_corpus(
            train_set, config, member_hp, derive_seed(seed, f"final-init-{k}"), source_vocab, target_vocab,
        )
        save_checkpoint(member, out / f"system5_member{k + 1}.pt", source_vocab, target_vocab, member_state)
        members.append(member)
    bleu, bleu_cased, errors = _evaluate(
        ROW_NAMES[4], "system5", members, source_vocab, target_vocab, MixMode.SENSITIVE, data, config, writer,
    )
    table.rows.append(ComparisonRow(
        method=ROW_NAMES[4], bleu=bleu, bleu_cased=bleu_cased, training_pairs=len(train_set),
        synthetic_pairs=len(synthetic[True]), members=len(members), errors=errors,
    ))

    writer.write_comparison(table, out)
    logger.info("\n" + table.to_text())
    return table
