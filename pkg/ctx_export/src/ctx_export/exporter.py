"""Batch export of per-token contextual vectors, plus validation of existing
vector files against the corpus they claim to cover.

The output format is one JSON object per line, `{"id": ..., "vectors":
[[...], ...]}` with one row per corpus token, written in corpus order. A
`<out>.meta.json` sidecar records the settings that produced the file. The
exporter never tokenizes anything itself: the corpus tokenization is the
tokenization, which is what makes row counts trustworthy downstream.
"""

import csv
import hashlib
import json
import os
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

LAYER_POLICIES = ("average", "top")


class ExportError(Exception):
    """Anything that should stop a run and reach the user as one message."""


@dataclass(frozen=True)
class Sentence:
    id: str
    tokens: tuple[str, ...]


# ---------------------------------------------------------------------------
# corpus reading: both on-disk corpus formats, reduced to (id, tokens)


def _read_csv(path: str) -> list[Sentence]:
    out = []
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("id", "tokens"):
            if col not in header:
                raise ExportError(f"{path}:1: missing column {col!r}")
        for rec in reader:
            line = reader.line_num
            tokens = (rec["tokens"] or "").split(" ")
            if tokens == [""]:
                raise ExportError(f"{path}:{line}: empty tokens field")
            out.append(Sentence(id=rec["id"], tokens=tuple(tokens)))
    return out


def _read_jsonl(path: str) -> list[Sentence]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as err:
                raise ExportError(f"{path}:{line_no}: invalid JSON: {err.msg}") from None
            if not isinstance(rec, dict) or "id" not in rec or "tokens" not in rec:
                raise ExportError(f"{path}:{line_no}: need an object with id and tokens")
            tokens = rec["tokens"]
            if not isinstance(tokens, list) or not tokens:
                raise ExportError(f"{path}:{line_no}: tokens must be a non-empty list")
            out.append(Sentence(id=str(rec["id"]), tokens=tuple(str(t) for t in tokens)))
    return out


def read_corpus(path: str) -> list[Sentence]:
    """All sentences in file order. The format comes from the extension,
    same convention as the consuming toolkit."""
    if not os.path.exists(path):
        raise ExportError(f"{path}: no such file")
    if path.endswith(".csv"):
        return _read_csv(path)
    if path.endswith(".jsonl"):
        return _read_jsonl(path)
    raise ExportError(f"{path}: unknown corpus format (expected .csv or .jsonl)")


# ---------------------------------------------------------------------------
# backends


class HashBackend:
    """Deterministic stand-in encoder.

    Rows come from SHA-256 in counter mode over (layer policy, dim, the whole
    token sequence, position, token), mapped to floats in [-1, 1). Not a
    trained model and the vectors carry no meaning, but they behave like
    contextual vectors are supposed to: the same word gets different rows in
    different sentences, and a sentence maps to the same matrix byte for byte
    on every platform and every run. Good for wiring, pipelines, and tests;
    swap in a real encoder for actual modeling work.
    """

    deterministic = True

    def __init__(self, dim: int, layer_policy: str):
        self.dim = dim
        self.layer_policy = layer_policy
        self.name = "hash-v1"

    def encode(self, sentence: Sentence) -> np.ndarray:
        ctx = "\x1f".join(sentence.tokens)
        rows = [
            self._token_vector(f"{self.layer_policy}|{self.dim}|{ctx}|{i}|{tok}")
            for i, tok in enumerate(sentence.tokens)
        ]
        return np.stack(rows)

    def _token_vector(self, material: str) -> np.ndarray:
        key = material.encode("utf-8")
        blocks = (self.dim + 3) // 4    # 4 uint64 per 32-byte digest
        raw = b"".join(hashlib.sha256(key + ctr.to_bytes(4, "big")).digest()
                       for ctr in range(blocks))
        ints = np.frombuffer(raw, dtype=">u8")[: self.dim]
        return ints / 2.0 ** 63 - 1.0


def make_backend(name: str, dim: int, layer_policy: str, weights: str | None = None):
    if name == "hash":
        return HashBackend(dim, layer_policy)
    if name == "elmo":
        if weights is None:
            raise ExportError(
                "no pretrained contextual model is bundled with this package; "
                "pass --weights pointing at a local model directory, or use "
                "--backend hash for deterministic stand-in vectors")
        raise ExportError(
            f"found --weights {weights} but no inference stack for it is "
            "installed in this environment; install one and register a "
            "backend for it, or use --backend hash")
    raise ExportError(f"unknown backend {name!r} (expected hash or elmo)")


# ---------------------------------------------------------------------------
# export


@dataclass
class ExportJob:
    data: str
    out: str
    dim: int = 1024
    layer_policy: str = "average"
    deterministic: bool = False
    jobs: int = 1

    def __post_init__(self):
        if self.dim <= 0:
            raise ExportError(f"dim must be positive, got {self.dim}")
        if self.layer_policy not in LAYER_POLICIES:
            raise ExportError(
                f"unknown layer policy {self.layer_policy!r} "
                f"(expected one of {', '.join(LAYER_POLICIES)})")
        if self.jobs < 1:
            raise ExportError(f"jobs must be at least 1, got {self.jobs}")


@dataclass
class ExportSummary:
    sentences: int
    tokens: int
    dim: int
    out: str
    merged_duplicates: int


def export(job: ExportJob, backend) -> ExportSummary:
    """Encode every unique sentence and write the vector file plus sidecar.

    Duplicate ids are allowed only when they are the same sentence producing
    the same matrix; anything else means the id is ambiguous and the run
    aborts. Output order is first-occurrence corpus order.
    """
    if job.deterministic and not getattr(backend, "deterministic", False):
        raise ExportError(
            f"backend {getattr(backend, 'name', type(backend).__name__)} cannot "
            "guarantee reproducible output; drop --deterministic or switch backends")

    corpus = read_corpus(job.data)
    if not corpus:
        raise ExportError(f"{job.data}: corpus is empty")

    order: list[Sentence] = []
    first: dict[str, Sentence] = {}
    repeats: list[Sentence] = []
    for sent in corpus:
        if sent.id in first:
            repeats.append(sent)
        else:
            first[sent.id] = sent
            order.append(sent)

    def encode(sent: Sentence) -> np.ndarray:
        mat = np.asarray(backend.encode(sent), dtype=float)
        if mat.ndim != 2 or mat.shape[0] != len(sent.tokens):
            got = mat.shape[0] if mat.ndim == 2 else f"shape {mat.shape}"
            raise ExportError(
                f"token drift on sentence {sent.id!r}: corpus has "
                f"{len(sent.tokens)} tokens, the model produced {got} rows")
        if mat.shape[1] != job.dim:
            raise ExportError(
                f"sentence {sent.id!r}: model produced {mat.shape[1]}-d rows, "
                f"expected {job.dim}")
        return mat

    if job.jobs > 1:
        with ThreadPoolExecutor(max_workers=job.jobs) as pool:
            mats = list(pool.map(encode, order))
    else:
        mats = [encode(s) for s in order]
    by_id = {s.id: m for s, m in zip(order, mats)}

    for sent in repeats:
        if sent.tokens != first[sent.id].tokens \
                or not np.array_equal(encode(sent), by_id[sent.id]):
            raise ExportError(
                f"duplicate sentence id {sent.id!r} with conflicting vectors; "
                "an id must name exactly one sentence")

    total_tokens = sum(len(s.tokens) for s in order)
    with open(job.out, "w", encoding="utf-8") as fh:
        for sent in order:
            rec = {"id": sent.id, "vectors": by_id[sent.id].tolist()}
            fh.write(json.dumps(rec, sort_keys=True, separators=(",", ":")) + "\n")
    meta = {
        "dim": job.dim,
        "layer_policy": job.layer_policy,
        "model": getattr(backend, "name", type(backend).__name__),
        "sentences": len(order),
        "tokens": total_tokens,
    }
    with open(job.out + ".meta.json", "w", encoding="utf-8") as fh:
        json.dump(meta, fh, indent=2, sort_keys=True)
        fh.write("\n")
    return ExportSummary(sentences=len(order), tokens=total_tokens, dim=job.dim,
                         out=job.out, merged_duplicates=len(repeats))


# ---------------------------------------------------------------------------
# validation


@dataclass
class Mismatch:
    id: str
    kind: str       # "token-count", "width", "duplicate", "corpus-duplicate"
    detail: str

    def to_dict(self) -> dict:
        return {"id": self.id, "kind": self.kind, "detail": self.detail}


@dataclass
class ValidationReport:
    total: int                      # unique corpus sentence ids
    covered: int                    # of those, present in the vector file
    mismatches: list[Mismatch] = field(default_factory=list)
    missing: list[str] = field(default_factory=list)
    extras: list[str] = field(default_factory=list)

    @property
    def coverage(self) -> float:
        return self.covered / self.total if self.total else 0.0

    @property
    def ok(self) -> bool:
        return self.total > 0 and self.covered == self.total and not self.mismatches

    def to_dict(self) -> dict:
        return {
            "total": self.total,
            "covered": self.covered,
            "coverage": self.coverage,
            "ok": self.ok,
            "mismatches": [m.to_dict() for m in self.mismatches],
            "missing": self.missing,
            "extras": self.extras,
        }


def _read_vector_file(path: str) -> tuple[dict[str, list[list[float]]], list[str]]:
    """Parse a vector JSONL file into id -> rows, plus the ids that appear
    more than once with different payloads."""
    if not os.path.exists(path):
        raise ExportError(f"{path}: no such file")
    rows_by_id: dict[str, list[list[float]]] = {}
    dup_conflicts: list[str] = []
    with open(path, encoding="utf-8") as fh:
        for line_no, raw in enumerate(fh, start=1):
            raw = raw.strip()
            if not raw:
                continue
            try:
                rec = json.loads(raw)
            except json.JSONDecodeError as err:
                raise ExportError(f"{path}:{line_no}: invalid JSON: {err.msg}") from None
            if not isinstance(rec, dict) or "id" not in rec or "vectors" not in rec:
                raise ExportError(f"{path}:{line_no}: need an object with id and vectors")
            vectors = rec["vectors"]
            if not isinstance(vectors, list) or any(not isinstance(r, list) for r in vectors):
                raise ExportError(f"{path}:{line_no}: vectors must be a list of rows")
            sid = str(rec["id"])
            if sid in rows_by_id and rows_by_id[sid] != vectors:
                dup_conflicts.append(sid)
            rows_by_id[sid] = vectors
    return rows_by_id, dup_conflicts


def validate(vectors_path: str, corpus_path: str, dim: int | None = None) -> ValidationReport:
    """Cross-check a vector file against a corpus: which sentences are
    covered, whether row counts match token counts, and whether every row has
    the expected width. Problems land in the report; only unreadable files
    raise."""
    by_id, dup_conflicts = _read_vector_file(vectors_path)
    corpus = read_corpus(corpus_path)

    counts: dict[str, int] = {}
    order: list[str] = []
    mismatches = [Mismatch(sid, "duplicate", "file has conflicting records for this id")
                  for sid in dup_conflicts]
    for sent in corpus:
        if sent.id in counts:
            if counts[sent.id] != len(sent.tokens):
                mismatches.append(Mismatch(
                    sent.id, "corpus-duplicate",
                    f"corpus repeats this id with {counts[sent.id]} and "
                    f"{len(sent.tokens)} tokens"))
            continue
        counts[sent.id] = len(sent.tokens)
        order.append(sent.id)

    if dim is None:
        dim = _expected_dim(vectors_path, by_id)

    covered = 0
    missing = []
    for sid in order:
        if sid not in by_id:
            missing.append(sid)
            continue
        covered += 1
        rows = by_id[sid]
        if len(rows) != counts[sid]:
            mismatches.append(Mismatch(
                sid, "token-count",
                f"corpus has {counts[sid]} tokens, file has {len(rows)} rows"))
        widths = sorted({len(r) for r in rows})
        if dim is not None and widths and widths != [dim]:
            mismatches.append(Mismatch(
                sid, "width",
                f"row widths {widths}, expected {dim}"))

    extras = sorted(set(by_id) - set(counts))
    return ValidationReport(total=len(order), covered=covered,
                            mismatches=mismatches, missing=missing, extras=extras)


def _expected_dim(path: str, by_id: dict[str, list[list[float]]]) -> int | None:
    """Sidecar wins; otherwise the most common row width in the file."""
    meta_path = path + ".meta.json"
    if os.path.exists(meta_path):
        try:
            with open(meta_path, encoding="utf-8") as fh:
                meta = json.load(fh)
            if isinstance(meta, dict) and isinstance(meta.get("dim"), int):
                return meta["dim"]
        except (OSError, json.JSONDecodeError):
            pass
    widths = Counter(len(row) for rows in by_id.values() for row in rows)
    return widths.most_common(1)[0][0] if widths else None
