"""The lexical baseline and the evaluation report: per-genre slices, the
strict macro F1, and part-of-speech breakdowns.

The baseline memorizes, for every word form, whether it was metaphoric more
often than literal in training. It is embarrassingly simple and surprisingly
hard to beat, which is exactly why it is here: any model worth training has
to clear it.

Run: python3 demos/04_baseline_and_metrics.py
"""

from metaphor import (Example, baseline_fit, baseline_predict, evaluate,
                      macro_f1_by_genre, pos_breakdown)
from metaphor.seeding import rng_for

rng = rng_for(0, "demo-baseline")
GENRES = ["conversation", "academic", "fiction", "news"]

# Words have a true metaphor propensity; sentences sample from it. The
# baseline can only ever recover the majority side of each propensity.
vocab = [f"lex{i}" for i in range(50)]
propensity = {w: float(rng.uniform(0.05, 0.95)) for w in vocab}
POS = ["NOUN", "VERB", "ADJ", "ADV"]


def sample(split, count):
    out = []
    for i in range(count):
        n = int(rng.integers(4, 10))
        toks = [vocab[int(rng.integers(0, 50))] for _ in range(n)]
        labels = [int(rng.random() < propensity[t]) for t in toks]
        pos = [POS[int(rng.integers(0, 4))] for _ in range(n)]
        out.append(Example(id=f"{split}{i}", tokens=toks, labels=labels,
                           pos=pos, genre=GENRES[i % 4], target_index=None))
    return out


train_set = sample("tr", 400)
test_set = sample("te", 120)

baseline = baseline_fit(train_set, task="seq")
print(f"baseline learned {len(baseline.counts)} word forms")
for w in vocab[:4]:
    vote = "metaphoric" if baseline_predict(baseline, w) == 1 else "literal"
    print(f"  {w}: true rate {propensity[w]:.2f} -> votes {vote}")
print(f"  never-seen-word -> votes "
      f"{'metaphoric' if baseline_predict(baseline, 'never-seen-word') else 'literal'}")

report = evaluate(baseline, test_set, "seq")
print(f"\ntest: P {report.precision:.3f} R {report.recall:.3f} "
      f"F1 {report.f1:.3f} Acc {report.accuracy:.3f} (n={report.total})")

print("\nper genre:")
for genre, sub in sorted(report.by_genre.items()):
    print(f"  {genre:<13} P {sub.precision:.3f} R {sub.recall:.3f} "
          f"F1 {sub.f1:.3f} (n={sub.total})")
print(f"macro F1 over the four genres: {macro_f1_by_genre(report):.3f}")

print("\nper part of speech (most frequent first):")
for row in pos_breakdown(report, min_metaphor_rate=0.0):
    print(f"  {row['pos']:<5} n={row['count']:<4} metaphor rate "
          f"{row['metaphor_rate']:.2f}  F1 {row['f1']:.3f}")
