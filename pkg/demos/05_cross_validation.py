"""Stratified k-fold cross-validation with pooled counts and per-fold spread.

Run: python3 demos/05_cross_validation.py
"""

from metaphor import (EmbeddingStore, Example, ModelConfig, TrainConfig,
                      make_folds, run_cv)
from metaphor.seeding import rng_for

rng = rng_for(5, "demo-cv")
vocab = [f"v{i}" for i in range(30)]
store = EmbeddingStore(
    word_vectors={w: rng.normal(size=8) for w in vocab},
    contextual={}, contextual_enabled=True, word_dim=8, contextual_dim=2)

# Classification rows: one target word per sentence, parity decides the label.
dataset = []
for i in range(50):
    n = int(rng.integers(3, 7))
    ids = [int(rng.integers(0, 30)) for _ in range(n)]
    t = int(rng.integers(0, n))
    labels = [0] * n
    labels[t] = ids[t] % 2
    dataset.append(Example(id=f"x{i}", tokens=[vocab[j] for j in ids],
                           labels=labels, pos=None, genre=None, target_index=t))

# Folds are stratified: each fold sees the corpus label mix.
plan = make_folds(dataset, k=5, seed=0)
for fold in range(5):
    held = [ex for ex in dataset if plan.fold_of(ex) == fold]
    pos = sum(ex.labels[ex.target_index] for ex in held)
    print(f"fold {fold}: {len(held)} examples, {pos} positive")

config = TrainConfig(task="cls", optimizer="adam", learning_rate=3e-3,
                     max_epochs=12, patience=12, seed=0, dev_fraction=0.15,
                     model=ModelConfig(word_dim=8, contextual_dim=2,
                                       index_dim=4, hidden_dim=10,
                                       ff_hidden_dim=8))
result = run_cv(dataset, store, config, k=5, jobs=2)

print("\nper fold:")
for fr in result.folds:
    print(f"  fold {fr.fold}: F1 {fr.report.f1:.3f} "
          f"Acc {fr.report.accuracy:.3f} (best epoch {fr.best_epoch})")

pooled = result.pooled
print(f"\npooled over held-out folds: P {pooled.precision:.3f} "
      f"R {pooled.recall:.3f} F1 {pooled.f1:.3f} Acc {pooled.accuracy:.3f}")
summary = result.summary()
print(f"F1 mean {summary['f1']['mean']:.3f} +- {summary['f1']['std']:.3f}")
