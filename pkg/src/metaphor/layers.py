"""Neural building blocks: embeddings, LSTM, BiLSTM, attention, feedforward, dropout.

Layers own parameter Tensors and expose `parameters()` / `param_dict()` for the
optimizer and for checkpointing. All math goes through the autodiff ops so the
whole stack is differentiable end to end.
"""

from __future__ import annotations

from typing import Sequence

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import ConfigError, DimensionError, DomainError


def xavier_uniform(rng: np.random.Generator, fan_in: int, fan_out: int,
                   shape: tuple[int, ...]) -> np.ndarray:
    limit = float(np.sqrt(6.0 / (fan_in + fan_out)))
    return rng.uniform(-limit, limit, size=shape)


class EmbeddingLayer:
    """Lookup table of row vectors; rows are parameters iff trainable."""

    def __init__(self, table: np.ndarray, trainable: bool, unk_index: int = 0,
                 name: str = "embedding"):
        table = np.asarray(table, dtype=np.float64)
        if table.ndim != 2:
            raise DimensionError(f"embedding table must be 2-d, got shape {table.shape}")
        if not 0 <= unk_index < table.shape[0]:
            raise DomainError(f"unk_index {unk_index} out of range for {table.shape[0]} rows")
        self.table = Tensor(table, requires_grad=trainable)
        self.trainable = trainable
        self.unk_index = unk_index
        self.name = name

    @property
    def vocab_size(self) -> int:
        return self.table.shape[0]

    @property
    def dim(self) -> int:
        return self.table.shape[1]

    def lookup(self, idx: int) -> Tensor:
        if not 0 <= idx < self.vocab_size:
            raise DomainError(
                f"{self.name}: index {idx} out of range for vocab of {self.vocab_size} "
                "(map unknown entries to unk_index upstream)")
        return ad.row(self.table, idx)

    def parameters(self) -> list[Tensor]:
        return [self.table] if self.trainable else []

    def param_dict(self) -> dict[str, Tensor]:
        return {f"{self.name}.table": self.table} if self.trainable else {}


def embed_lookup(layer: EmbeddingLayer, idx: int) -> Tensor:
    return layer.lookup(idx)


class LstmCell:
    """Single-direction LSTM cell over [x; h] with fused gate weights.

    Gate order in the fused matrices is input, forget, output, candidate:
    i = sigmoid(Wi [x;h] + bi), f = sigmoid(Wf [x;h] + bf),
    o = sigmoid(Wo [x;h] + bo), g = tanh(Wg [x;h] + bg),
    c' = f*c + i*g, h' = o*tanh(c').
    """

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 name: str = "lstm"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.name = name
        cat = input_dim + hidden_dim
        # Per-gate Xavier on (hidden, input+hidden), stacked into one (4h, cat).
        blocks = [xavier_uniform(rng, cat, hidden_dim, (hidden_dim, cat)) for _ in range(4)]
        self.w = Tensor(np.vstack(blocks), requires_grad=True)
        bias = np.zeros(4 * hidden_dim)
        bias[hidden_dim:2 * hidden_dim] = 1.0  # forget-gate bias keeps early memory open
        self.b = Tensor(bias, requires_grad=True)

    def step(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        if x.shape != (self.input_dim,):
            raise DimensionError(f"{self.name}: input shape {x.shape}, expected ({self.input_dim},)")
        if h.shape != (self.hidden_dim,) or c.shape != (self.hidden_dim,):
            raise DimensionError(
                f"{self.name}: state shapes {h.shape}/{c.shape}, expected ({self.hidden_dim},)")
        hd = self.hidden_dim
        z = ad.add(ad.matmul(self.w, ad.concat([x, h])), self.b)
        i = ad.sigmoid(ad.slice_vec(z, 0, hd))
        f = ad.sigmoid(ad.slice_vec(z, hd, 2 * hd))
        o = ad.sigmoid(ad.slice_vec(z, 2 * hd, 3 * hd))
        g = ad.tanh(ad.slice_vec(z, 3 * hd, 4 * hd))
        c_new = ad.add(ad.mul(f, c), ad.mul(i, g))
        h_new = ad.mul(o, ad.tanh(c_new))
        return h_new, c_new

    def run(self, xs: Sequence[Tensor]) -> list[Tensor]:
        """States h_1..h_n from zero initial state."""
        h = ad.constant(np.zeros(self.hidden_dim))
        c = ad.constant(np.zeros(self.hidden_dim))
        out = []
        for x in xs:
            h, c = self.step(x, h, c)
            out.append(h)
        return out

    def parameters(self) -> list[Tensor]:
        return [self.w, self.b]

    def param_dict(self) -> dict[str, Tensor]:
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}


def lstm_step(cell: LstmCell, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
    return cell.step(x, h, c)


class BiLstmLayer:
    """Forward and backward LSTM; per-token output is [fwd_i ; bwd_i]."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 name: str = "bilstm"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.name = name
        self.forward_cell = LstmCell(input_dim, hidden_dim, rng, name=f"{name}.fwd")
        self.backward_cell = LstmCell(input_dim, hidden_dim, rng, name=f"{name}.bwd")

    @property
    def output_dim(self) -> int:
        return 2 * self.hidden_dim

    def run(self, xs: Sequence[Tensor]) -> list[Tensor]:
        if len(xs) == 0:
            raise DomainError(f"{self.name}: empty input sequence")
        fwd = self.forward_cell.run(xs)
        bwd = self.backward_cell.run(list(reversed(xs)))[::-1]
        return [ad.concat([f, b]) for f, b in zip(fwd, bwd)]

    def parameters(self) -> list[Tensor]:
        return self.forward_cell.parameters() + self.backward_cell.parameters()

    def param_dict(self) -> dict[str, Tensor]:
        return {**self.forward_cell.param_dict(), **self.backward_cell.param_dict()}


def bilstm_run(layer: BiLstmLayer, xs: Sequence[Tensor]) -> list[Tensor]:
    return layer.run(xs)


class AttentionLayer:
    """Scalar score per state, softmax over the sentence, convex pooling."""

    def __init__(self, state_dim: int, rng: np.random.Generator, name: str = "attention"):
        self.state_dim = state_dim
        self.name = name
        self.w = Tensor(xavier_uniform(rng, state_dim, 1, (1, state_dim)), requires_grad=True)
        self.b = Tensor(np.zeros(1), requires_grad=True)

    def weights(self, hs: Sequence[Tensor]) -> Tensor:
        if len(hs) == 0:
            raise DomainError(f"{self.name}: empty state sequence")
        scores = [ad.add(ad.matmul(self.w, h), self.b) for h in hs]
        return ad.softmax(ad.concat(scores))

    def pool(self, hs: Sequence[Tensor]) -> Tensor:
        a = self.weights(hs)
        return ad.matmul(a, ad.stack_rows(hs))

    def parameters(self) -> list[Tensor]:
        return [self.w, self.b]

    def param_dict(self) -> dict[str, Tensor]:
        return {f"{self.name}.w": self.w, f"{self.name}.b": self.b}


def attention_pool(layer: AttentionLayer, hs: Sequence[Tensor]) -> Tensor:
    return layer.pool(hs)


class FeedForward:
    """One ReLU hidden layer, then a linear projection (2 logits by default)."""

    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator,
                 output_dim: int = 2, name: str = "ff"):
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.output_dim = output_dim
        self.name = name
        self.w1 = Tensor(xavier_uniform(rng, input_dim, hidden_dim, (input_dim, hidden_dim)),
                         requires_grad=True)
        self.b1 = Tensor(np.zeros(hidden_dim), requires_grad=True)
        self.w2 = Tensor(xavier_uniform(rng, hidden_dim, output_dim, (hidden_dim, output_dim)),
                         requires_grad=True)
        self.b2 = Tensor(np.zeros(output_dim), requires_grad=True)

    def apply(self, x: Tensor) -> Tensor:
        """x is one input vector or a matrix with one input per row."""
        hidden = ad.relu(ad.add(ad.matmul(x, self.w1), self.b1))
        return ad.add(ad.matmul(hidden, self.w2), self.b2)

    def parameters(self) -> list[Tensor]:
        return [self.w1, self.b1, self.w2, self.b2]

    def param_dict(self) -> dict[str, Tensor]:
        return {f"{self.name}.w1": self.w1, f"{self.name}.b1": self.b1,
                f"{self.name}.w2": self.w2, f"{self.name}.b2": self.b2}


def feedforward(layer: FeedForward, x: Tensor) -> Tensor:
    return layer.apply(x)


def dropout_apply(x: Tensor, rate: float, mode: str,
                  rng: np.random.Generator | None = None) -> Tensor:
    """Inverted dropout: train mode masks with prob `rate` and rescales survivors."""
    if not 0.0 <= rate < 1.0:
        raise ConfigError(f"dropout rate must be in [0, 1), got {rate}")
    if mode not in ("train", "eval"):
        raise ConfigError(f"dropout mode must be 'train' or 'eval', got {mode!r}")
    if mode == "eval" or rate == 0.0:
        return x
    if rng is None:
        raise ConfigError("dropout in train mode needs an rng")
    keep = (rng.random(x.shape) >= rate).astype(np.float64)
    return ad.mul(x, ad.constant(keep / (1.0 - rate)))
