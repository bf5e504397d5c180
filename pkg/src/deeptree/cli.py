"""Command line entry point: ``deeptree {generate,reconstruct,classify,bench,count-tv}``."""
from __future__ import annotations

import argparse
import csv
import json
import sys

from .baselines import BaselineKind, classify
from .core import Dataset, ModelParams, Regime, TreeTopology, Variant
from .experiments import ExperimentConfig, run_count_tv_experiment, run_separation_experiment, write_count_tv
from .reconstruct.tree import UnsupportedConfiguration, reconstruct_tree
from .samplers import GroundTruth, InstanceSpec, generate_instance, make_dataset, random_rewiring, sample

EXIT_OK, EXIT_USAGE, EXIT_FAILED = 0, 1, 2


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _params(args, variant: Variant, q: int, k: int, h: int) -> ModelParams:
    rewiring = random_rewiring(k, h, args.seed) if variant is Variant.FIM else None
    return ModelParams(variant, q, k, args.lam, regime=Regime(args.regime), rewiring=rewiring, seed=args.seed)


def cmd_generate(args) -> int:
    tree = TreeTopology(args.d, args.h)
    variant = Variant(args.model)
    truth = sample(tree, _params(args, variant, args.q, args.k, args.h))
    labels, S = generate_instance(tree, InstanceSpec(args.h0, args.h1), args.seed)
    truth = truth.with_instance(labels, S)
    make_dataset(truth).write(args.out)
    if args.truth:
        truth.write(args.truth)
    return EXIT_OK


def _model_for(args, data: Dataset) -> ModelParams:
    if args.truth:
        params = GroundTruth.read(args.truth).params
        if args.lam is not None:
            params = ModelParams(
                params.variant, params.q, params.k, args.lam,
                regime=params.regime, rewiring=params.rewiring, seed=params.seed,
            )
        return params
    if args.lam is None:
        raise ValueError("--lambda (or --truth) is required")
    return _params(args, data.model, data.q, data.k, data.h)


def cmd_reconstruct(args) -> int:
    data = Dataset.read(args.inp)
    params = _model_for(args, data)
    result = reconstruct_tree(data, params, r=args.r, min_count=args.min_count)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(result.to_json(), fh, indent=2, sort_keys=True)
        fh.write("\n")
    return EXIT_OK if result.ok else EXIT_FAILED


def cmd_classify(args) -> int:
    data = Dataset.read(args.inp)
    kind = BaselineKind(args.baseline)
    depth = args.depth
    if depth is None and args.h1 is not None:
        depth = 2 * (data.h - args.h1)
    pred = classify(data, kind, lam=args.lam, depth=depth, alpha=args.alpha)
    with open(args.out, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["leaf", "label"])
        for node, lab in zip(data.unlabeled_nodes, pred.tolist()):
            writer.writerow([str(node), lab])
    return EXIT_OK


def cmd_bench(args) -> int:
    config = ExperimentConfig.from_json(args.config)

    def progress(done, total):
        if not args.quiet:
            print(f"\r{done}/{total} trials", end="", file=sys.stderr, flush=True)

    report = run_separation_experiment(config, workers=args.workers, progress=progress)
    if not args.quiet:
        print(file=sys.stderr)
    report.write(args.out_dir)
    return EXIT_FAILED if report.any_failure else EXIT_OK


def cmd_count_tv(args) -> int:
    h_list = [int(x) for x in args.h_list.split(",") if x]
    rows = run_count_tv_experiment(args.d, args.lam, args.q, args.k, h_list, args.samples, args.seed)
    write_count_tv(rows, args.out)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="deeptree", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a tree model and write a dataset")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--h", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--model", choices=[v.value for v in Variant], default="IIDM")
    p.add_argument("--regime", choices=[r.value for r in Regime], default="random")
    p.add_argument("--h0", type=int, required=True)
    p.add_argument("--h1", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="dataset file")
    p.add_argument("--truth", help="also write the full ground truth here")
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("reconstruct", help="infer the hierarchy and labels of a dataset")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--r", type=int, default=2)
    p.add_argument("--out", required=True, help="result JSON")
    p.add_argument("--lambda", dest="lam", type=float, help="channel copy probability")
    p.add_argument("--truth", help="read the model parameters from a ground-truth file")
    p.add_argument("--seed", type=int, default=0, help="FIM: seed the rewiring was generated from")
    p.add_argument("--regime", choices=[r.value for r in Regime], default="random")
    p.add_argument("--min-count", type=int, default=30)
    p.set_defaults(func=cmd_reconstruct)

    p = sub.add_parser("classify", help="run a baseline classifier")
    p.add_argument("--in", dest="inp", required=True)
    p.add_argument("--baseline", choices=[b.value for b in BaselineKind], required=True)
    p.add_argument("--out", required=True, help="leaf,label CSV")
    p.add_argument("--lambda", dest="lam", type=float)
    p.add_argument("--depth", type=int, help="LOCAL_ML: channel steps between labeled and unlabeled leaves")
    p.add_argument("--h1", type=int, help="LOCAL_ML: take the depth as 2*(h-h1)")
    p.add_argument("--alpha", type=float, default=1.0)
    p.set_defaults(func=cmd_classify)

    p = sub.add_parser("bench", help="run a separation experiment from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--quiet", action="store_true")
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("count-tv", help="census total-variation decay with height")
    p.add_argument("--d", type=int, required=True)
    p.add_argument("--lambda", dest="lam", type=float, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--k", type=int, default=1)
    p.add_argument("--h-list", required=True, help="comma separated heights")
    p.add_argument("--samples", type=int, default=100_000)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="CSV path; a .json copy is written next to it")
    p.set_defaults(func=cmd_count_tv)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, KeyError, FileNotFoundError, UnsupportedConfiguration) as exc:
        print(f"deeptree {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
