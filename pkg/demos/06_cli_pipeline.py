"""The whole command-line pipeline in one sitting: generate a corpus, train,
evaluate against the baseline, cross-validate, and dump predictions.

Everything runs in a temporary directory through the `metaphor` command's
entry point, exactly as a shell user would drive it.

Run: python3 demos/06_cli_pipeline.py
"""

import json
import os
import tempfile

from metaphor import Example, write_sequence_jsonl
from metaphor.cli import main
from metaphor.seeding import rng_for


def make_corpus(d):
    rng = rng_for(9, "demo-cli")
    genres = ["conversation", "academic", "fiction", "news"]
    vocab = [f"tok{i}" for i in range(25)]
    sents = []
    for i in range(48):
        n = int(rng.integers(3, 8))
        ids = [int(rng.integers(0, 25)) for _ in range(n)]
        sents.append(Example(id=f"d{i}", tokens=[vocab[j] for j in ids],
                             labels=[j % 2 for j in ids], pos=None,
                             genre=genres[i % 4], target_index=None))
    write_sequence_jsonl(sents[:36], os.path.join(d, "train.jsonl"))
    write_sequence_jsonl(sents[36:], os.path.join(d, "test.jsonl"))
    with open(os.path.join(d, "vectors.txt"), "w") as fh:
        for w in vocab:
            vals = " ".join(repr(float(v)) for v in rng.normal(size=8))
            fh.write(f"{w} {vals}\n")
    # Options can live in a config file; flags still win over it.
    with open(os.path.join(d, "run.conf"), "w") as fh:
        fh.write("word_dim = 8\ncontextual_dim = 2\nindex_dim = 4\n"
                 "hidden_dim = 12\nff_hidden_dim = 8\nseed = 4\n"
                 "max_epochs = 15\n")


def run(argv):
    print(f"\n$ metaphor {' '.join(argv)}")
    code = main(argv)
    print(f"[exit {code}]")
    assert code == 0


with tempfile.TemporaryDirectory() as d:
    make_corpus(d)
    os.chdir(d)

    run(["train", "--task", "seq", "--config", "run.conf",
         "--data", "train.jsonl", "--embeddings", "vectors.txt",
         "--out", "tagger.json"])

    run(["eval", "--ckpt", "tagger.json", "--data", "test.jsonl",
         "--embeddings", "vectors.txt", "--out", "eval.json"])

    run(["baseline", "--task", "seq", "--train", "train.jsonl",
         "--test", "test.jsonl"])

    run(["cv", "--task", "seq", "--config", "run.conf", "--k", "4",
         "--data", "train.jsonl", "--embeddings", "vectors.txt",
         "--out", "cv.json", "--max-epochs", "8"])

    run(["predict", "--ckpt", "tagger.json", "--data", "test.jsonl",
         "--embeddings", "vectors.txt", "--out", "preds.jsonl"])

    print("\nfirst two prediction records:")
    with open("preds.jsonl") as fh:
        for line in list(fh)[:2]:
            rec = json.loads(line)
            print(f"  {rec['id']}: {list(zip(rec['tokens'], rec['pred_labels']))}")

    cv = json.load(open("cv.json"))
    print(f"\ncv summary: F1 mean {cv['summary']['f1']['mean']:.3f} "
          f"+- {cv['summary']['f1']['std']:.3f} over k={cv['k']} folds")
    os.chdir("/")
