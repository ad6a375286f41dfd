"""`ctx-export`: export contextual token vectors for a corpus, or validate an
existing vector file against one.

Exit codes: 0 success (for validate: full coverage, no mismatches), 1 runtime
or validation failure, 2 usage errors.
"""

import argparse
import json
import sys

from .exporter import (LAYER_POLICIES, ExportError, ExportJob, export,
                       make_backend, validate)


def cmd_export(args) -> int:
    job = ExportJob(data=args.data, out=args.out, dim=args.dim,
                    layer_policy=args.layer_policy,
                    deterministic=args.deterministic, jobs=args.jobs)
    backend = make_backend(args.backend, args.dim, args.layer_policy, args.weights)
    summary = export(job, backend)
    print(f"wrote {summary.sentences} sentences ({summary.tokens} tokens, "
          f"{summary.dim}-d) to {summary.out}")
    if summary.merged_duplicates:
        print(f"merged {summary.merged_duplicates} duplicate corpus rows")
    print(f"sidecar: {summary.out}.meta.json")
    return 0


def cmd_validate(args) -> int:
    report = validate(args.vectors, args.data, args.dim)
    print(f"coverage: {100.0 * report.coverage:.1f}% "
          f"({report.covered} of {report.total} sentences)")
    for sid in report.missing:
        print(f"missing: {sid}")
    for m in report.mismatches:
        print(f"mismatch [{m.kind}] {m.id}: {m.detail}")
    if report.extras:
        print(f"{len(report.extras)} extra id(s) not in the corpus: "
              + ", ".join(report.extras[:5])
              + ("..." if len(report.extras) > 5 else ""))
    if args.report:
        with open(args.report, "w", encoding="utf-8") as fh:
            json.dump(report.to_dict(), fh, indent=2, sort_keys=True)
            fh.write("\n")
        print(f"report: {args.report}")
    print("ok" if report.ok else "not ok")
    return 0 if report.ok else 1


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="ctx-export",
        description="Produce or check per-token contextual vector files.")
    sub = parser.add_subparsers(dest="command", required=True)

    ex = sub.add_parser("export", help="encode a corpus and write vectors + sidecar")
    ex.add_argument("--data", required=True, help="corpus file (.csv or .jsonl)")
    ex.add_argument("--out", required=True, help="output vector jsonl path")
    ex.add_argument("--backend", default="hash", choices=["hash", "elmo"],
                    help="encoder to run (default: hash, the built-in stand-in)")
    ex.add_argument("--dim", type=int, default=1024, help="vector width (default 1024)")
    ex.add_argument("--layer-policy", default="average", choices=list(LAYER_POLICIES),
                    help="how the encoder mixes its layers, recorded in the sidecar")
    ex.add_argument("--weights", default=None,
                    help="local directory holding pretrained model weights")
    ex.add_argument("--deterministic", action="store_true",
                    help="fail instead of running a backend that cannot reproduce itself")
    ex.add_argument("--jobs", type=int, default=1,
                    help="encode sentences on this many threads")
    ex.set_defaults(fn=cmd_export)

    va = sub.add_parser("validate", help="cross-check a vector file against a corpus")
    va.add_argument("--vectors", required=True, help="vector jsonl file")
    va.add_argument("--data", required=True, help="corpus file (.csv or .jsonl)")
    va.add_argument("--dim", type=int, default=None,
                    help="expected width (default: sidecar, then majority width)")
    va.add_argument("--report", default=None, help="write the full report here as json")
    va.set_defaults(fn=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.fn(args)
    except ExportError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except OSError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
