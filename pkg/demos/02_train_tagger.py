"""Train the per-token tagger on a small synthetic corpus, watch early
stopping pick the best epoch, then save and reload the checkpoint.

Run: python3 demos/02_train_tagger.py
"""

import os
import tempfile

from metaphor import (EmbeddingStore, Example, ModelConfig, TrainConfig,
                      build_model, dev_split, evaluate, load_checkpoint,
                      save_checkpoint, train)
from metaphor.seeding import rng_for

# A made-up language where even-numbered words are "metaphoric". The model
# has to learn that from the word vectors alone.
rng = rng_for(42, "demo-corpus")
vocab = [f"word{i}" for i in range(40)]
store = EmbeddingStore(
    word_vectors={w: rng.normal(size=12) for w in vocab},
    contextual={}, contextual_enabled=True, word_dim=12, contextual_dim=2)

corpus = []
for i in range(60):
    n = int(rng.integers(3, 9))
    ids = [int(rng.integers(0, 40)) for _ in range(n)]
    corpus.append(Example(id=f"s{i}", tokens=[vocab[j] for j in ids],
                          labels=[j % 2 for j in ids], pos=None,
                          genre=None, target_index=None))
train_set, dev_set = dev_split(corpus, fraction=0.2, seed=0)
print(f"{len(train_set)} train sentences, {len(dev_set)} dev sentences")

config = TrainConfig(task="seq", max_epochs=40, patience=5, seed=3,
                     model=ModelConfig(word_dim=12, contextual_dim=2,
                                       index_dim=4, hidden_dim=16,
                                       ff_hidden_dim=12))
model = build_model("seq", store, config.model, rng_for(3, "init"))
result = train(model, train_set, dev_set, config)

print(f"ran {len(result.history)} epochs, best dev F1 at epoch {result.best_epoch}")
for stats in result.history[:3]:
    print(f"  epoch {stats.epoch}: train loss {stats.train_loss:.4f}, "
          f"dev F1 {stats.dev_f1:.4f}")
print("  ...")

report = evaluate(model, dev_set, "seq")
print(f"dev after restore: P {report.precision:.3f} R {report.recall:.3f} "
      f"F1 {report.f1:.3f} Acc {report.accuracy:.3f}")

# Checkpoints are plain JSON; reloading gives back the exact same weights.
with tempfile.TemporaryDirectory() as d:
    path = os.path.join(d, "tagger.json")
    save_checkpoint(model, path)
    print(f"checkpoint: {os.path.getsize(path)} bytes")
    reloaded = load_checkpoint(path, store)
    again = evaluate(reloaded, dev_set, "seq")
    assert again.f1 == report.f1
    print(f"reloaded model scores identically (F1 {again.f1:.3f})")

sent = dev_set[0]
pred = model.predict_labels(sent)
print("sample sentence:", " ".join(sent.tokens))
print("gold:", sent.labels)
print("pred:", pred)
