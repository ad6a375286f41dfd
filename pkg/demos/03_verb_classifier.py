"""Train the single-target classifier and look at what its attention layer
actually attends to.

The classifier gets the whole sentence plus the position of one target word
and decides whether that word is used metaphorically. Attention turns the
per-token LSTM states into one summary vector, so its weights say which
tokens mattered for the decision.

Run: python3 demos/03_verb_classifier.py
"""

from metaphor import (EmbeddingStore, Example, ModelConfig, TrainConfig,
                      build_model, evaluate, train)
from metaphor.seeding import rng_for

rng = rng_for(7, "demo-cls")
vocab = [f"w{i}" for i in range(30)]
store = EmbeddingStore(
    word_vectors={w: rng.normal(size=10) for w in vocab},
    contextual={}, contextual_enabled=True, word_dim=10, contextual_dim=2)

# Target word's parity decides the label; other tokens are noise.
examples = []
for i in range(40):
    n = int(rng.integers(4, 9))
    ids = [int(rng.integers(0, 30)) for _ in range(n)]
    t = int(rng.integers(0, n))
    labels = [0] * n
    labels[t] = ids[t] % 2
    examples.append(Example(id=f"c{i}", tokens=[vocab[j] for j in ids],
                            labels=labels, pos=None, genre=None,
                            target_index=t))

config = TrainConfig(task="cls", optimizer="adam", learning_rate=3e-3,
                     max_epochs=60, patience=60, seed=1,
                     model=ModelConfig(word_dim=10, contextual_dim=2,
                                       index_dim=6, hidden_dim=16,
                                       ff_hidden_dim=12))
model = build_model("cls", store, config.model, rng_for(1, "init"))
train(model, examples, None, config)

report = evaluate(model, examples, "cls")
print(f"training-set fit: P {report.precision:.3f} R {report.recall:.3f} "
      f"F1 {report.f1:.3f} Acc {report.accuracy:.3f}")

print("\nattention over three sentences (* marks the target):")
for ex in examples[:3]:
    weights = model.attention_weights(ex)
    pred = model.predict_target(ex)
    verdict = "metaphoric" if pred == 1 else "literal"
    print(f"  {ex.id}: predicted {verdict}")
    for i, (tok, a) in enumerate(zip(ex.tokens, weights)):
        mark = "*" if i == ex.target_index else " "
        bar = "#" * int(round(40 * float(a)))
        print(f"    {mark} {tok:<4} {float(a):.3f} {bar}")
