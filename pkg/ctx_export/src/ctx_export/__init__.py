"""Contextual-vector exporter: encode corpora into per-token vector files and
validate vector files against corpora."""

from .exporter import (ExportError, ExportJob, ExportSummary, HashBackend,
                       Mismatch, Sentence, ValidationReport, export,
                       make_backend, read_corpus, validate)

__version__ = "0.1.0"
