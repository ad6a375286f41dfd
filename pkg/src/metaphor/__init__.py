"""Metaphor detection toolkit: BiLSTM sequence labeling and target-verb
classification over word + contextual embeddings, with a lexical baseline,
built on a small reverse-mode autodiff core."""

from .autodiff import (GradCheckReport, Tensor, adam, backward,
                       clip_global_norm, grad_check, optimizer_step, sgd,
                       zero_grads)
from .data import (VUA_GENRES, EmbeddingStore, Example, FoldPlan,
                   build_input_vector, build_input_vectors, dev_split,
                   example_label, load_classification_csv, load_contextual,
                   load_dataset, load_sequence_jsonl, load_word_vectors,
                   make_folds, write_classification_csv, write_sequence_jsonl)
from .errors import (AlignmentError, ConfigError, DimensionError, DomainError,
                     ParseError, TrainingError)
from .harness import (CvResult, EpochStats, EvalReport, FoldResult,
                      TrainConfig, TrainResult, ablate_contextual,
                      evaluate, example_loss, macro_f1_by_genre, nll_loss,
                      pos_breakdown, run_cv, store_for, train,
                      write_history_csv)
from .layers import (AttentionLayer, BiLstmLayer, EmbeddingLayer, FeedForward,
                     LstmCell, attention_pool, bilstm_run, dropout_apply,
                     embed_lookup, feedforward, lstm_step, xavier_uniform)
from .models import (LexicalBaseline, ModelConfig, SequenceLabeler,
                     TargetClassifier, argmax_label, baseline_fit,
                     baseline_predict, build_model, load_checkpoint,
                     save_checkpoint, seq_extract_verb_label, zero_parameters)
from .seeding import derive_seed, rng_for

__version__ = "0.1.0"
