"""Corpus ingestion, vocabulary-free embedding lookup, folds and splits.

On-disk formats (all UTF-8):

* classification CSV with header ``id,genre,tokens,pos,verb_index,label``;
  ``tokens``/``pos`` are single-space-joined, ``verb_index`` is 0-based,
  ``label`` is 0 or 1, ``genre`` and ``pos`` may be empty.
* sequence JSONL, one object per line:
  ``{"id": str, "genre": str, "tokens": [str], "pos": [str], "labels": [0|1]}``.
* word-vector text: ``token f1 ... f300`` per line, space-separated, no header.
* contextual-vector JSONL: ``{"id": str, "vectors": [[f x 1024] x n_tokens]}``.
"""

from __future__ import annotations

import csv
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from . import autodiff as ad
from .autodiff import Tensor
from .errors import AlignmentError, DomainError, ParseError
from .layers import EmbeddingLayer
from .seeding import rng_for

VUA_GENRES = ("conversation", "academic", "fiction", "news")

CSV_COLUMNS = ("id", "genre", "tokens", "pos", "verb_index", "label")


@dataclass
class Example:
    """One annotated sentence; `target_index` marks the verb for classification."""

    id: str
    tokens: list[str]
    labels: list[int] | None
    pos: list[str] | None = None
    genre: str | None = None
    target_index: int | None = None

    def validate(self) -> None:
        if len(self.tokens) == 0:
            raise DomainError(f"example {self.id}: empty sentence")
        if self.labels is not None:
            if len(self.labels) != len(self.tokens):
                raise AlignmentError(
                    f"example {self.id}: {len(self.labels)} labels for {len(self.tokens)} tokens")
            bad = [v for v in self.labels if v not in (0, 1)]
            if bad:
                raise DomainError(f"example {self.id}: labels must be 0 or 1, got {bad[0]!r}")
        if self.pos is not None and len(self.pos) != len(self.tokens):
            raise AlignmentError(
                f"example {self.id}: {len(self.pos)} POS tags for {len(self.tokens)} tokens")
        if self.target_index is not None and not 0 <= self.target_index < len(self.tokens):
            raise DomainError(
                f"example {self.id}: target index {self.target_index} out of range "
                f"for {len(self.tokens)} tokens")

    @property
    def target_label(self) -> int:
        if self.target_index is None or self.labels is None:
            raise DomainError(f"example {self.id}: no labeled target")
        return self.labels[self.target_index]


def example_label(ex: Example) -> int:
    """Example-level label used for stratification: the target's label when a
    target is set, otherwise whether any token is metaphorical."""
    if ex.labels is None:
        raise DomainError(f"example {ex.id}: unlabeled example cannot be stratified")
    if ex.target_index is not None:
        return ex.labels[ex.target_index]
    return int(any(ex.labels))


# ---------------------------------------------------------------------------
# loaders


def load_classification_csv(path: str, allow_unlabeled: bool = False) -> list[Example]:
    """One example per row; every non-target token is labeled literal."""
    examples = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [c for c in CSV_COLUMNS if c not in header]
        if missing:
            raise ParseError(f"missing column(s) {', '.join(missing)}", path=path, line=1)
        for rec in reader:
            line = reader.line_num
            tokens = (rec["tokens"] or "").split(" ")
            if tokens == [""]:
                raise ParseError("empty tokens field", path=path, line=line)
            try:
                verb_index = int(rec["verb_index"])
            except ValueError:
                raise ParseError(f"non-integer verb_index {rec['verb_index']!r}",
                                 path=path, line=line) from None
            if not 0 <= verb_index < len(tokens):
                raise ParseError(
                    f"verb_index {verb_index} out of range for {len(tokens)} tokens",
                    path=path, line=line)
            raw_label = (rec["label"] or "").strip()
            if raw_label == "" and allow_unlabeled:
                labels = None
            elif raw_label in ("0", "1"):
                labels = [0] * len(tokens)
                labels[verb_index] = int(raw_label)
            else:
                raise ParseError(f"label must be 0 or 1, got {raw_label!r}", path=path, line=line)
            pos = (rec["pos"] or "").split(" ") if rec["pos"] else None
            ex = Example(
                id=rec["id"],
                tokens=tokens,
                labels=labels,
                pos=pos,
                genre=rec["genre"] or None,
                target_index=verb_index,
            )
            try:
                ex.validate()
            except (AlignmentError, DomainError) as err:
                raise ParseError(str(err), path=path, line=line) from None
            examples.append(ex)
    return examples


def load_sequence_jsonl(path: str, allow_unlabeled: bool = False) -> list[Example]:
    """Fully-annotated sentences with genre; ids must be unique."""
    examples = []
    seen: set[str] = set()
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as err:
                raise ParseError(f"invalid JSON: {err.msg}", path=path, line=line_no) from None
            if not isinstance(rec, dict):
                raise ParseError("record must be a JSON object", path=path, line=line_no)
            for key in ("id", "tokens"):
                if key not in rec:
                    raise ParseError(f"missing key {key!r}", path=path, line=line_no)
            if "labels" not in rec and not allow_unlabeled:
                raise ParseError("missing key 'labels'", path=path, line=line_no)
            genre = rec.get("genre") or None
            if genre is not None and genre not in VUA_GENRES:
                raise ParseError(
                    f"unknown genre {genre!r} (expected one of {', '.join(VUA_GENRES)})",
                    path=path, line=line_no)
            ex = Example(
                id=str(rec["id"]),
                tokens=[str(t) for t in rec["tokens"]],
                labels=list(rec["labels"]) if rec.get("labels") is not None else None,
                pos=[str(t) for t in rec["pos"]] if rec.get("pos") else None,
                genre=genre,
                target_index=None,
            )
            if ex.id in seen:
                raise ParseError(f"duplicate sentence id {ex.id!r}", path=path, line=line_no)
            seen.add(ex.id)
            try:
                ex.validate()
            except (AlignmentError, DomainError) as err:
                raise ParseError(str(err), path=path, line=line_no) from None
            examples.append(ex)
    return examples


def load_dataset(path: str, allow_unlabeled: bool = False) -> list[Example]:
    """Dispatch on extension: .csv is classification, .jsonl/.json is sequence."""
    if path.endswith(".csv"):
        return load_classification_csv(path, allow_unlabeled=allow_unlabeled)
    if path.endswith(".jsonl") or path.endswith(".json"):
        return load_sequence_jsonl(path, allow_unlabeled=allow_unlabeled)
    raise ParseError("cannot infer dataset format; expected a .csv or .jsonl path", path=path)


def write_classification_csv(examples: list[Example], path: str) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for ex in examples:
            if ex.target_index is None:
                raise DomainError(f"example {ex.id}: classification rows need a target index")
            writer.writerow([
                ex.id,
                ex.genre or "",
                " ".join(ex.tokens),
                " ".join(ex.pos) if ex.pos else "",
                ex.target_index,
                ex.target_label,
            ])


def write_sequence_jsonl(examples: list[Example], path: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        for ex in examples:
            if ex.labels is None:
                raise DomainError(f"example {ex.id}: cannot serialize unlabeled example")
            rec = {
                "id": ex.id,
                "genre": ex.genre or "",
                "tokens": ex.tokens,
                "pos": ex.pos or [],
                "labels": ex.labels,
            }
            fh.write(json.dumps(rec, ensure_ascii=False) + "\n")


def load_word_vectors(path: str, dim: int = 300,
                      permissive: bool = False) -> dict[str, np.ndarray]:
    """Text-format word vectors; duplicate words keep the first occurrence."""
    table: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.rstrip("\n")
            if not raw:
                continue
            parts = raw.split(" ")
            if len(parts) != dim + 1:
                msg = f"expected a token and {dim} floats, got {len(parts)} fields"
                if permissive:
                    warnings.warn(f"{path}:{line_no}: {msg}; skipping line")
                    continue
                raise ParseError(msg, path=path, line=line_no)
            try:
                vec = np.array([float(v) for v in parts[1:]], dtype=np.float64)
            except ValueError:
                if permissive:
                    warnings.warn(f"{path}:{line_no}: non-numeric field; skipping line")
                    continue
                raise ParseError("non-numeric vector field", path=path, line=line_no) from None
            table.setdefault(parts[0], vec)
    return table


def load_contextual(path: str, dim: int = 1024) -> dict[str, np.ndarray]:
    """Per-sentence contextual vector matrices keyed by sentence id."""
    out: dict[str, np.ndarray] = {}
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as err:
                raise ParseError(f"invalid JSON: {err.msg}", path=path, line=line_no) from None
            if "id" not in rec or "vectors" not in rec:
                raise ParseError("record needs 'id' and 'vectors'", path=path, line=line_no)
            sid = str(rec["id"])
            if sid in out:
                raise ParseError(f"duplicate sentence id {sid!r}", path=path, line=line_no)
            rows = rec["vectors"]
            for i, r in enumerate(rows):
                if len(r) != dim:
                    raise ParseError(
                        f"row {i} of {sid!r} has width {len(r)}, expected {dim}",
                        path=path, line=line_no)
            out[sid] = np.asarray(rows, dtype=np.float64).reshape(len(rows), dim)
    return out


# ---------------------------------------------------------------------------
# embedding store


@dataclass
class EmbeddingStore:
    """Static word vectors plus per-sentence contextual vectors.

    Lookup policy: exact match, then lowercase, then a zero vector. With
    `contextual_enabled` off (or a sentence id missing from the map), the
    contextual part is all zeros, which is the ablation switch.
    """

    word_vectors: dict[str, np.ndarray] = field(default_factory=dict)
    contextual: dict[str, np.ndarray] = field(default_factory=dict)
    contextual_enabled: bool = True
    word_dim: int = 300
    contextual_dim: int = 1024

    def word_vector(self, token: str) -> np.ndarray:
        vec = self.word_vectors.get(token)
        if vec is None:
            vec = self.word_vectors.get(token.lower())
        if vec is None:
            return np.zeros(self.word_dim)
        return vec

    def contextual_rows(self, sentence_id: str, n_tokens: int) -> np.ndarray:
        if not self.contextual_enabled:
            return np.zeros((n_tokens, self.contextual_dim))
        rows = self.contextual.get(sentence_id)
        if rows is None:
            return np.zeros((n_tokens, self.contextual_dim))
        if rows.shape[0] != n_tokens:
            raise AlignmentError(
                f"sentence {sentence_id!r}: {rows.shape[0]} contextual rows "
                f"for {n_tokens} tokens")
        return rows

    @property
    def input_dim(self) -> int:
        return self.word_dim + self.contextual_dim


def build_input_vector(store: EmbeddingStore, example: Example, i: int,
                       with_index: bool = False,
                       index_layer: EmbeddingLayer | None = None) -> Tensor:
    """Per-token model input: [word ; contextual] plus, optionally, the
    learned target-marker embedding row for (i == target_index)."""
    if not 0 <= i < len(example.tokens):
        raise DomainError(f"token index {i} out of range for {len(example.tokens)} tokens")
    ctx = store.contextual_rows(example.id, len(example.tokens))
    return _assemble_input(store, example, i, ctx, with_index, index_layer)


def build_input_vectors(store: EmbeddingStore, example: Example,
                        with_index: bool = False,
                        index_layer: EmbeddingLayer | None = None) -> list[Tensor]:
    """All token inputs for a sentence; fetches the contextual matrix once."""
    ctx = store.contextual_rows(example.id, len(example.tokens))
    return [_assemble_input(store, example, i, ctx, with_index, index_layer)
            for i in range(len(example.tokens))]


def _assemble_input(store: EmbeddingStore, example: Example, i: int,
                    ctx: np.ndarray, with_index: bool,
                    index_layer: EmbeddingLayer | None) -> Tensor:
    static = ad.constant(np.concatenate([store.word_vector(example.tokens[i]), ctx[i]]))
    if not with_index:
        return static
    if index_layer is None:
        raise DomainError("with_index requires the target-marker embedding layer")
    if example.target_index is None:
        raise DomainError(f"example {example.id}: no target index for the marker embedding")
    marker = index_layer.lookup(1 if i == example.target_index else 0)
    return ad.concat([static, marker])


# ---------------------------------------------------------------------------
# folds and splits


@dataclass
class FoldPlan:
    k: int
    assignments: dict[str, int]
    seed: int

    def fold_of(self, ex: Example) -> int:
        return self.assignments[ex.id]

    def split(self, examples: list[Example], fold: int) -> tuple[list[Example], list[Example]]:
        """(train, test) for one held-out fold, preserving dataset order."""
        train = [ex for ex in examples if self.assignments[ex.id] != fold]
        test = [ex for ex in examples if self.assignments[ex.id] == fold]
        return train, test


def _stratified_order(examples: list[Example], rng: np.random.Generator) -> list[int]:
    """Indices grouped by example label, shuffled within each group."""
    groups: dict[int, list[int]] = {}
    for i, ex in enumerate(examples):
        groups.setdefault(example_label(ex), []).append(i)
    order: list[int] = []
    for label in sorted(groups):
        idx = np.array(groups[label])
        rng.shuffle(idx)
        order.extend(int(v) for v in idx)
    return order


def make_folds(examples: list[Example], k: int = 10, seed: int = 0) -> FoldPlan:
    """Label-stratified partition into k folds whose sizes differ by at most 1."""
    if k < 2:
        raise DomainError(f"need at least 2 folds, got {k}")
    if len(examples) < k:
        raise DomainError(f"cannot make {k} folds from {len(examples)} examples")
    ids = [ex.id for ex in examples]
    if len(set(ids)) != len(ids):
        raise DomainError("fold assignment requires unique example ids")
    rng = rng_for(seed, "folds")
    order = _stratified_order(examples, rng)
    assignments = {examples[pos].id: slot % k for slot, pos in enumerate(order)}
    return FoldPlan(k=k, assignments=assignments, seed=seed)


def dev_split(train_examples: list[Example], fraction: float = 0.1,
              seed: int = 0) -> tuple[list[Example], list[Example]]:
    """Deterministic stratified split; dev gets round(fraction * N) examples."""
    if not 0.0 < fraction < 1.0:
        raise DomainError(f"fraction must be in (0, 1), got {fraction}")
    n = len(train_examples)
    n_dev = round(fraction * n)
    if n_dev == 0 or n_dev == n:
        raise DomainError(f"split of {n} examples at {fraction} leaves an empty side")

    groups: dict[int, list[int]] = {}
    for i, ex in enumerate(train_examples):
        groups.setdefault(example_label(ex), []).append(i)
    labels = sorted(groups)
    quotas = {lab: int(math.floor(fraction * len(groups[lab]))) for lab in labels}
    deficit = n_dev - sum(quotas.values())
    by_remainder = sorted(
        labels, key=lambda lab: (fraction * len(groups[lab])) % 1.0, reverse=True)
    for lab in by_remainder:
        if deficit <= 0:
            break
        if quotas[lab] < len(groups[lab]):
            quotas[lab] += 1
            deficit -= 1

    rng = rng_for(seed, "dev_split")
    dev_idx: set[int] = set()
    for lab in labels:
        idx = np.array(groups[lab])
        rng.shuffle(idx)
        dev_idx.update(int(v) for v in idx[:quotas[lab]])
    train = [ex for i, ex in enumerate(train_examples) if i not in dev_idx]
    dev = [ex for i, ex in enumerate(train_examples) if i in dev_idx]
    return train, dev
