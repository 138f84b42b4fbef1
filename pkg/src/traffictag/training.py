"""Training loop, evaluation, epoch selection, and run logging.

A run is fully determined by its ExperimentConfig: the seed drives parameter
initialization, per-epoch batch shuffling (epoch-indexed child seeds), and
dropout, so two runs with the same config produce identical metric reports.
Training proceeds to the largest candidate epoch count; at every candidate
the dev set is scored and the best-scoring snapshot (by the architecture's
criterion) becomes the final model.
"""

from __future__ import annotations

import hashlib
import json
import time
from dataclasses import dataclass, field, fields
from typing import Sequence

import numpy as np

from . import metrics
from .autodiff import backward
from .corpus import TRAFFIC, Corpus, CorpusError, GeneratorConfig, Tweet
from .models import (
    ARCH_KIND,
    ARCHITECTURES,
    ModelConfig,
    WordVocab,
    _ModelBase,
    build_model,
)
from .optim import adam_step, clip_global_norm, sgd_step
from .subword import SubwordVocab, build_vocab

EPOCH_CANDIDATES = (10, 15, 20, 25, 30, 40)

# architecture -> (optimizer, learning rate)
DEFAULT_OPTIMIZER = {
    "cnn": ("adam", 1e-3),
    "lstm_classifier": ("adam", 1e-3),
    "lstm_tagger": ("sgd", 0.015),
    "lstm_crf": ("sgd", 0.015),
    "joint": ("adam", 1e-4),
    "enhanced_joint": ("adam", 1e-4),
}

# dev-selection criterion per model kind
CRITERION = {"classifier": "f1c", "tagger": "f1s", "joint": "sen_acc"}


class TrainingDiverged(RuntimeError):
    """Loss became non-finite; training aborts with a diagnostic."""


@dataclass(frozen=True)
class ExperimentConfig:
    architecture: str
    seed: int
    corpus: str | None = None
    corpus_format: str | None = None
    out_dir: str | None = None
    model: ModelConfig = field(default_factory=ModelConfig)
    optimizer: str | None = None  # default per architecture
    learning_rate: float | None = None
    batch_size: int = 32
    epoch_candidates: tuple[int, ...] = EPOCH_CANDIDATES
    clip_norm: float | None = None  # None -> architecture default; 0 disables
    generate_size: int | None = None
    generate_traffic_fraction: float = 0.5
    generate_region: str = "BRU"
    generate_overlap: float = 0.7
    generate_pool_size: int = 20

    def __post_init__(self):
        if self.architecture not in ARCHITECTURES:
            raise ValueError(f"unknown architecture {self.architecture!r}")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if not self.epoch_candidates:
            raise ValueError("epoch_candidates must be non-empty")
        object.__setattr__(self, "epoch_candidates", tuple(sorted(self.epoch_candidates)))

    def resolved_optimizer(self) -> tuple[str, float]:
        default_name, default_lr = DEFAULT_OPTIMIZER[self.architecture]
        return (self.optimizer or default_name,
                self.learning_rate if self.learning_rate is not None else default_lr)

    def resolved_clip_norm(self) -> float | None:
        """Gradient-norm ceiling: 5.0 for the recurrent architectures, off
        for the cnn; an explicit value overrides (0 disables)."""
        if self.clip_norm is None:
            return None if self.architecture == "cnn" else 5.0
        return self.clip_norm if self.clip_norm > 0 else None

    def to_flat_dict(self) -> dict:
        out = {}
        for f in fields(self):
            if f.name == "model":
                continue
            value = getattr(self, f.name)
            out[f.name] = list(value) if isinstance(value, tuple) else value
        out.update(self.model.to_dict())
        return out

    @classmethod
    def from_flat_dict(cls, data: dict) -> "ExperimentConfig":
        data = dict(data)
        model_keys = {f.name for f in fields(ModelConfig)}
        model_kwargs = {k: data.pop(k) for k in list(data) if k in model_keys}
        own_keys = {f.name for f in fields(cls)}
        unknown = [k for k in data if k not in own_keys]
        if unknown:
            raise ValueError(f"unknown config keys: {unknown}")
        if "epoch_candidates" in data:
            data["epoch_candidates"] = tuple(data["epoch_candidates"])
        return cls(model=ModelConfig.from_dict(model_kwargs), **data)

    def config_hash(self) -> str:
        """Identifies the experiment; the output directory is not part of it."""
        flat = self.to_flat_dict()
        flat.pop("out_dir")
        canonical = json.dumps(flat, sort_keys=True)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def generator_config(self) -> GeneratorConfig:
        if self.generate_size is None:
            raise ValueError("config has no generator settings")
        return GeneratorConfig(
            size=self.generate_size,
            traffic_fraction=self.generate_traffic_fraction,
            region=self.generate_region,
            shared_vocab_fraction=self.generate_overlap,
            pool_size=self.generate_pool_size,
        )


@dataclass
class RunLog:
    seed: int
    config_hash: str
    criterion: str
    epochs: list[dict] = field(default_factory=list)
    selected_epoch: int | None = None
    test: dict | None = None
    wall_clock_s: float | None = None

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "config_hash": self.config_hash,
            "criterion": self.criterion,
            "epochs": self.epochs,
            "selected_epoch": self.selected_epoch,
            "test": self.test,
            "wall_clock_s": self.wall_clock_s,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def evaluate(model: _ModelBase, corpus: Corpus) -> metrics.MetricReport:
    """Score a model on a corpus with the metrics its kind supports."""
    if len(corpus) == 0:
        raise CorpusError("cannot evaluate on an empty corpus")
    predictions = [model.predict(t) for t in corpus]
    gold_classes = [t.class_label for t in corpus]
    gold_spans = [t.spans for t in corpus]
    report = metrics.MetricReport(
        support={
            "sentences": len(corpus),
            "gold_traffic": sum(1 for c in gold_classes if c == TRAFFIC),
            "gold_spans": sum(len(s) for s in gold_spans),
        }
    )
    kind = model.kind
    if kind in ("classifier", "joint"):
        pred_classes = [p.class_label for p in predictions]
        report.precision_c, report.recall_c, report.f1c = metrics.classification_f1(
            pred_classes, gold_classes
        )
        report.support["pred_traffic"] = sum(1 for c in pred_classes if c == TRAFFIC)
    if kind in ("tagger", "joint"):
        pred_spans = [p.spans for p in predictions]
        report.precision_s, report.recall_s, report.f1s = metrics.span_f1(
            pred_spans, gold_spans
        )
        report.per_type = metrics.span_f1_per_type(pred_spans, gold_spans)
        report.support["pred_spans"] = sum(len(s) for s in pred_spans)
    if kind == "joint":
        report.sen_acc = metrics.sentence_accuracy(
            [p.class_label for p in predictions],
            [p.spans for p in predictions],
            gold_classes,
            gold_spans,
        )
    return report


def criterion_value(report: metrics.MetricReport, kind: str) -> float:
    value = getattr(report, CRITERION[kind])
    if value is None:
        raise ValueError(f"report lacks the {CRITERION[kind]} criterion")
    return value


def build_vocabularies(
    config: ExperimentConfig, train_corpus: Corpus
) -> tuple[WordVocab | None, SubwordVocab | None]:
    needs_subword = (
        ARCH_KIND[config.architecture] == "joint" and config.model.encoder == "subword"
    )
    if needs_subword:
        return None, build_vocab(train_corpus, config.model.subword_vocab_size)
    return WordVocab.build(train_corpus), None


def _batches(order: np.ndarray, batch_size: int):
    for lo in range(0, len(order), batch_size):
        yield order[lo : lo + batch_size]


def train_model(
    config: ExperimentConfig, train_corpus: Corpus, dev_corpus: Corpus
) -> tuple[_ModelBase, RunLog]:
    """Train one model and return it with its run log (test not yet filled)."""
    started = time.perf_counter()
    word_vocab, sub_vocab = build_vocabularies(config, train_corpus)
    model = build_model(
        config.architecture, config.model, config.seed, word_vocab, sub_vocab
    )
    kind = model.kind
    opt_name, lr = config.resolved_optimizer()
    step = adam_step if opt_name == "adam" else sgd_step
    clip_norm = config.resolved_clip_norm()
    dropout_rng = np.random.default_rng([config.seed, 7])
    log = RunLog(seed=config.seed, config_hash=config.config_hash(), criterion=CRITERION[kind])

    tweets: Sequence[Tweet] = train_corpus.tweets
    best_value = -1.0
    best_epoch: int | None = None
    best_snapshot = None
    for epoch in range(1, max(config.epoch_candidates) + 1):
        order = np.random.default_rng([config.seed, 11, epoch]).permutation(len(tweets))
        epoch_losses = []
        for batch in _batches(order, config.batch_size):
            model.store.zero_grad()
            scale = 1.0 / len(batch)
            for i in batch:
                loss = model.loss(tweets[int(i)], train=True, rng=dropout_rng)
                value = float(loss.data)
                if not np.isfinite(value):
                    raise TrainingDiverged(
                        f"non-finite loss at epoch {epoch} on tweet {tweets[int(i)].id}"
                    )
                epoch_losses.append(value)
                backward(loss * scale)
            if clip_norm is not None:
                clip_global_norm(model.store, clip_norm)
            step(model.store, lr)
        entry = {"epoch": epoch, "train_loss": float(np.mean(epoch_losses))}
        if epoch in config.epoch_candidates:
            report = evaluate(model, dev_corpus)
            entry["dev"] = report.to_dict()
            value = criterion_value(report, kind)
            if value > best_value:
                best_value = value
                best_epoch = epoch
                best_snapshot = model.store.snapshot()
        log.epochs.append(entry)

    model.store.restore(best_snapshot)
    log.selected_epoch = best_epoch
    log.wall_clock_s = time.perf_counter() - started
    return model, log


def train_and_test(
    config: ExperimentConfig,
    train_corpus: Corpus,
    dev_corpus: Corpus,
    test_corpus: Corpus,
) -> tuple[_ModelBase, RunLog, metrics.MetricReport]:
    model, log = train_model(config, train_corpus, dev_corpus)
    report = evaluate(model, test_corpus)
    log.test = report.to_dict()
    return model, log, report
