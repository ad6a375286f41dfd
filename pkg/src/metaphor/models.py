"""The three predictors: per-token sequence labeler, target-verb classifier,
and the lexical majority baseline, plus checkpoint save/load.

Prediction rule everywhere: argmax of the 2 logits with ties going to the
literal class (class 0), which is the majority class in all the corpora.
"""

from __future__ import annotations

import base64
import json
from dataclasses import asdict, dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .data import EmbeddingStore, Example, build_input_vectors
from .errors import ConfigError, DomainError
from .layers import (AttentionLayer, BiLstmLayer, EmbeddingLayer, FeedForward,
                     dropout_apply, xavier_uniform)
from .seeding import rng_for

CHECKPOINT_FORMAT = "metaphor-checkpoint"
CHECKPOINT_VERSION = 1


@dataclass
class ModelConfig:
    """Architecture hyperparameters. Defaults are the full-scale settings;
    tests shrink them."""

    word_dim: int = 300
    contextual_dim: int = 1024
    index_dim: int = 50
    hidden_dim: int = 300
    ff_hidden_dim: int = 100
    dropout_input: float = 0.3
    dropout_ff: float = 0.3

    def __post_init__(self):
        for name in ("word_dim", "contextual_dim", "index_dim", "hidden_dim", "ff_hidden_dim"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive, got {getattr(self, name)}")
        for name in ("dropout_input", "dropout_ff"):
            rate = getattr(self, name)
            if not 0.0 <= rate < 1.0:
                raise ConfigError(f"{name} must be in [0, 1), got {rate}")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "ModelConfig":
        return cls(**d)


def _check_store(store: EmbeddingStore, config: ModelConfig) -> None:
    if store.word_dim != config.word_dim or store.contextual_dim != config.contextual_dim:
        raise ConfigError(
            f"embedding store dims ({store.word_dim} word, {store.contextual_dim} contextual) "
            f"do not match model config ({config.word_dim}, {config.contextual_dim})")


def argmax_label(logits: Tensor) -> int:
    """1 only when the metaphor logit strictly wins; ties are literal."""
    return int(logits.data[1] > logits.data[0])


class SequenceLabeler:
    """BiLSTM over [word ; contextual] inputs with a per-token feedforward head."""

    task = "seq"

    def __init__(self, store: EmbeddingStore, config: ModelConfig,
                 rng: np.random.Generator):
        _check_store(store, config)
        self.store = store
        self.config = config
        input_dim = config.word_dim + config.contextual_dim
        self.bilstm = BiLstmLayer(input_dim, config.hidden_dim, rng)
        self.ff = FeedForward(2 * config.hidden_dim, config.ff_hidden_dim, rng)

    def forward(self, example: Example, mode: str = "eval",
                rng: np.random.Generator | None = None) -> list[Tensor]:
        """One 2-logit tensor per token. Dropout is active only in train mode."""
        cfg = self.config
        xs = build_input_vectors(self.store, example)
        xs = [dropout_apply(x, cfg.dropout_input, mode, rng) for x in xs]
        hs = self.bilstm.run(xs)
        hs = [dropout_apply(h, cfg.dropout_ff, mode, rng) for h in hs]
        logits = self.ff.apply(ad.stack_rows(hs))
        return [ad.row(logits, i) for i in range(len(xs))]

    def predict_labels(self, example: Example) -> list[int]:
        return [argmax_label(t) for t in self.forward(example)]

    def predict_target(self, example: Example) -> int:
        return seq_extract_verb_label(self.forward(example), example.target_index)

    def parameters(self) -> list[Tensor]:
        return self.bilstm.parameters() + self.ff.parameters()

    def param_dict(self) -> dict[str, Tensor]:
        return {**self.bilstm.param_dict(), **self.ff.param_dict()}


class TargetClassifier:
    """BiLSTM over [word ; contextual ; target-marker] inputs, attention-pooled
    into one sentence vector, then a feedforward head for the target verb."""

    task = "cls"

    def __init__(self, store: EmbeddingStore, config: ModelConfig,
                 rng: np.random.Generator):
        _check_store(store, config)
        self.store = store
        self.config = config
        self.index_embedding = EmbeddingLayer(
            xavier_uniform(rng, 2, config.index_dim, (2, config.index_dim)),
            trainable=True, name="index_embedding")
        input_dim = config.word_dim + config.contextual_dim + config.index_dim
        self.bilstm = BiLstmLayer(input_dim, config.hidden_dim, rng)
        self.attention = AttentionLayer(2 * config.hidden_dim, rng)
        self.ff = FeedForward(2 * config.hidden_dim, config.ff_hidden_dim, rng)

    def forward(self, example: Example, mode: str = "eval",
                rng: np.random.Generator | None = None) -> Tensor:
        if example.target_index is None:
            raise DomainError(f"example {example.id}: classifier needs a target index")
        cfg = self.config
        xs = build_input_vectors(self.store, example, with_index=True,
                                 index_layer=self.index_embedding)
        xs = [dropout_apply(x, cfg.dropout_input, mode, rng) for x in xs]
        hs = self.bilstm.run(xs)
        pooled = self.attention.pool(hs)
        pooled = dropout_apply(pooled, cfg.dropout_ff, mode, rng)
        return self.ff.apply(pooled)

    def attention_weights(self, example: Example) -> np.ndarray:
        xs = build_input_vectors(self.store, example, with_index=True,
                                 index_layer=self.index_embedding)
        return self.attention.weights(self.bilstm.run(xs)).data

    def predict_target(self, example: Example) -> int:
        return argmax_label(self.forward(example))

    def parameters(self) -> list[Tensor]:
        return (self.index_embedding.parameters() + self.bilstm.parameters()
                + self.attention.parameters() + self.ff.parameters())

    def param_dict(self) -> dict[str, Tensor]:
        return {**self.index_embedding.param_dict(), **self.bilstm.param_dict(),
                **self.attention.param_dict(), **self.ff.param_dict()}


Model = SequenceLabeler | TargetClassifier


def seq_extract_verb_label(seq_predictions: list[Tensor], target_index: int | None) -> int:
    """Read the target verb's label off full-sentence predictions."""
    if target_index is None or not 0 <= target_index < len(seq_predictions):
        raise DomainError(
            f"target index {target_index} out of range for {len(seq_predictions)} predictions")
    return argmax_label(seq_predictions[target_index])


def build_model(task: str, store: EmbeddingStore, config: ModelConfig,
                rng: np.random.Generator) -> Model:
    if task == "seq":
        return SequenceLabeler(store, config, rng)
    if task == "cls":
        return TargetClassifier(store, config, rng)
    raise ConfigError(f"unknown task {task!r} (expected 'seq' or 'cls')")


def zero_parameters(model: Model) -> None:
    """Reset every parameter to zero (uniform [0.5, 0.5] posteriors everywhere)."""
    for p in model.parameters():
        p.data = np.zeros_like(p.data)


# ---------------------------------------------------------------------------
# lexical baseline


@dataclass
class LexicalBaseline:
    """Per-word metaphor/literal counts; predicts metaphor only on a strict
    majority in the training counts. Unseen words and ties are literal."""

    counts: dict[str, list[int]] = field(default_factory=dict)  # word -> [metaphor, literal]

    task = "baseline"

    def observe(self, token: str, label: int) -> None:
        slot = self.counts.setdefault(token.lower(), [0, 0])
        slot[0 if label == 1 else 1] += 1

    def predict_token(self, token: str) -> int:
        slot = self.counts.get(token.lower())
        if slot is None:
            return 0
        return int(slot[0] > slot[1])

    def predict_labels(self, example: Example) -> list[int]:
        return [self.predict_token(t) for t in example.tokens]

    def predict_target(self, example: Example) -> int:
        if example.target_index is None:
            raise DomainError(f"example {example.id}: no target index")
        return self.predict_token(example.tokens[example.target_index])


def baseline_fit(train: list[Example], task: str = "seq") -> LexicalBaseline:
    """Count annotated tokens: all tokens for the sequence task, only the
    target token for the classification task."""
    model = LexicalBaseline()
    for ex in train:
        if ex.labels is None:
            raise DomainError(f"example {ex.id}: unlabeled example in baseline training")
        if task == "cls":
            if ex.target_index is None:
                raise DomainError(f"example {ex.id}: classification baseline needs targets")
            model.observe(ex.tokens[ex.target_index], ex.labels[ex.target_index])
        elif task == "seq":
            for token, label in zip(ex.tokens, ex.labels):
                model.observe(token, label)
        else:
            raise ConfigError(f"unknown task {task!r} (expected 'seq' or 'cls')")
    return model


def baseline_predict(model: LexicalBaseline, token: str) -> int:
    return model.predict_token(token)


# ---------------------------------------------------------------------------
# checkpoints


def _encode_array(arr: np.ndarray) -> dict:
    return {
        "shape": list(arr.shape),
        "data": base64.b64encode(arr.astype("<f8").tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    arr = np.frombuffer(raw, dtype="<f8").astype(np.float64)
    return arr.reshape(entry["shape"])


def save_checkpoint(model: Model, path: str) -> None:
    """Versioned JSON container; save -> load -> save is byte-identical."""
    payload = {
        "format": CHECKPOINT_FORMAT,
        "version": CHECKPOINT_VERSION,
        "kind": model.task,
        "config": model.config.to_dict(),
        "params": {name: _encode_array(t.data) for name, t in model.param_dict().items()},
    }
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, sort_keys=True, separators=(",", ":"))
        fh.write("\n")


def load_checkpoint(path: str, store: EmbeddingStore) -> Model:
    with open(path, encoding="utf-8") as fh:
        payload = json.load(fh)
    if payload.get("format") != CHECKPOINT_FORMAT:
        raise ConfigError(f"{path}: not a model checkpoint")
    if payload.get("version") != CHECKPOINT_VERSION:
        raise ConfigError(f"{path}: unsupported checkpoint version {payload.get('version')!r}")
    config = ModelConfig.from_dict(payload["config"])
    model = build_model(payload["kind"], store, config, rng_for(0, "checkpoint-skeleton"))
    params = model.param_dict()
    saved = payload["params"]
    if set(saved) != set(params):
        missing = sorted(set(params) - set(saved))
        extra = sorted(set(saved) - set(params))
        raise ConfigError(f"{path}: parameter set mismatch (missing {missing}, extra {extra})")
    for name, tensor in params.items():
        arr = _decode_array(saved[name])
        if arr.shape != tensor.data.shape:
            raise ConfigError(
                f"{path}: parameter {name} has shape {arr.shape}, "
                f"model expects {tensor.data.shape}")
        tensor.data = arr
    return model
