"""Command-line front end.

Subcommands: ``gen-data`` (write a synthetic dataset to disk), ``run``
(the selector x budget x seed sweep), ``sweep-gap`` (full-pool reference
vs. the max-budget models), ``ablate`` (criterion knock-outs), and
``report`` (re-print summaries from existing CSVs). Exit codes: 0 on
success, 1 for validation problems, 2 when some runs failed.
"""

import argparse
import json
import sys
from dataclasses import replace

from .datagen import SbmConfig, generate_sbm
from .dataio import save_dataset
from .errors import GraphExtractError, UsageError
from .experiment import parse_spec, report, run_ablate, run_experiment, sweep_gap

__all__ = ["main", "build_parser"]


def _read_text(path: str) -> str:
    try:
        with open(path, encoding="utf-8") as fh:
            return fh.read()
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc


def _spec_from_args(args):
    spec = parse_spec(_read_text(args.config))
    if getattr(args, "seed", None) is not None:
        spec = replace(spec, seeds=(args.seed,))
    if getattr(args, "out", None) is not None:
        spec = replace(spec, output_dir=args.out)
    return spec


def cmd_gen_data(args) -> int:
    doc = json.loads(_read_text(args.config))
    block = doc.get("sbm") or doc.get("dataset", {}).get("sbm")
    if block is None:
        raise UsageError("config needs an 'sbm' block (top level or under 'dataset')")
    try:
        cfg = SbmConfig(**block)
    except TypeError as exc:
        raise UsageError(f"sbm: {exc}") from exc
    dataset = generate_sbm(cfg, args.seed)
    save_dataset(args.out, *dataset)
    print(f"wrote {dataset[0].num_nodes}-node dataset to {args.out}")
    return 0


def cmd_run(args) -> int:
    return run_experiment(_spec_from_args(args), jobs=args.jobs)


def cmd_sweep_gap(args) -> int:
    return sweep_gap(_spec_from_args(args), with_reference=args.with_reference)


def cmd_ablate(args) -> int:
    return run_ablate(_spec_from_args(args), jobs=args.jobs)


def cmd_report(args) -> int:
    out = args.out
    if out is None:
        if args.config is None:
            raise UsageError("report needs --out or --config")
        out = parse_spec(_read_text(args.config)).output_dir
    return report(out)


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(
        prog="graphextract",
        description="Budget-constrained extraction of graph node classifiers.",
    )
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("gen-data", help="generate a synthetic block-model dataset")
    g.add_argument("--config", required=True, help="JSON file with an 'sbm' block")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True, help="directory for the dataset files")
    g.set_defaults(func=cmd_gen_data)

    r = sub.add_parser("run", help="run the full selector/budget/seed sweep")
    r.add_argument("--config", required=True, help="experiment JSON file")
    r.add_argument("--jobs", type=int, default=1, help="parallel worker processes")
    r.add_argument("--seed", type=int, default=None, help="replace the seed list with one seed")
    r.add_argument("--out", default=None, help="override the output directory")
    r.set_defaults(func=cmd_run)

    s = sub.add_parser("sweep-gap", help="gap to the full-pool reference model")
    s.add_argument("--config", required=True)
    s.add_argument("--with-reference", action="store_true",
                   help="train the per-seed reference models if missing")
    s.add_argument("--out", default=None)
    s.set_defaults(func=cmd_sweep_gap)

    a = sub.add_parser("ablate", help="selection-criterion knock-out comparison")
    a.add_argument("--config", required=True)
    a.add_argument("--jobs", type=int, default=1)
    a.add_argument("--out", default=None)
    a.set_defaults(func=cmd_ablate)

    t = sub.add_parser("report", help="re-print summaries from result CSVs")
    t.add_argument("--out", default=None, help="experiment output directory")
    t.add_argument("--config", default=None, help="read the directory from this config")
    t.set_defaults(func=cmd_report)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except GraphExtractError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except json.JSONDecodeError as exc:
        print(f"error: config is not valid JSON: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
