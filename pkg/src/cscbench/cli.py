"""Command-line entry points.

Subcommands: verify, coherence, pursue, fig4, unfold-sweep. All runs are
seeded and emit byte-stable CSV/JSON.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .analysis import lemma1_threshold, run_verification_suite, suite_to_json
from .data import SyntheticDatasetSpec
from .dictionary import (
    dictionary_from_json,
    mutual_coherence,
    random_dictionary,
)
from .errors import ShapeError
from .learning import (
    LearnConfig,
    reconstruction_experiment,
    unfold_sweep,
    write_experiment_csv,
    write_sweep_csv,
)
from .pursuit import LassoProblem, PursuitConfig, export_trace_csv, fista, ista


def _parse_shape(text):
    try:
        return tuple(int(part) for part in text.lower().split("x"))
    except ValueError as exc:
        raise ShapeError(f"cannot parse shape {text!r}; expected e.g. 4x4") from exc


def _cmd_verify(args):
    reports = run_verification_suite(seed=args.seed)
    print(suite_to_json(reports))
    return 0 if all(r["pass"] for r in reports) else 1


def _cmd_coherence(args):
    spatial = _parse_shape(args.kernel_size)
    input_shape = _parse_shape(args.input_shape) + (args.channels,)
    bank = random_dictionary(
        input_shape,
        spatial,
        args.width,
        dilation=args.dilation,
        padding=args.padding,
        seed=args.seed,
    )
    mu = mutual_coherence(bank)
    threshold = lemma1_threshold(bank)
    print(
        json.dumps(
            {
                "mu": mu,
                "uniqueness_threshold": threshold if np.isfinite(threshold) else "inf",
            }
        )
    )
    return 0


def _dictionary_from_config(doc):
    if "random" in doc:
        spec = doc["random"]
        return random_dictionary(
            tuple(spec["input_shape"]),
            tuple(spec["kernel_size"]) if isinstance(spec["kernel_size"], list)
            else (int(spec["kernel_size"]),),
            int(spec["width"]),
            dilation=int(spec.get("dilation", 1)),
            padding=spec.get("padding", "valid"),
            seed=int(spec.get("seed", 0)),
        )
    return dictionary_from_json(doc)


def _cmd_pursue(args):
    with open(args.config) as fh:
        doc = json.load(fh)
    dictionary = _dictionary_from_config(doc["dictionary"])
    signal_spec = doc["signal"]
    rows = dictionary.shape[0]
    if isinstance(signal_spec, dict):
        rng = np.random.default_rng(int(signal_spec.get("seed", 0)))
        signal = rng.standard_normal(rows)
    else:
        signal = np.asarray(signal_spec, dtype=float)
    problem = LassoProblem(dictionary, signal, float(doc.get("beta", 0.1)))
    config = PursuitConfig(
        iterations=int(doc.get("iterations", 100)),
        tol=float(doc.get("tol", 1e-12)),
        nonneg=bool(doc.get("nonneg", False)),
        lipschitz_override=doc.get("lipschitz_override"),
    )
    solver = fista if doc.get("solver", "ista") == "fista" else ista
    result = solver(problem, config)
    export_trace_csv(result, args.out)
    print(
        json.dumps(
            {
                "iterations_run": result.iterations_run,
                "final_objective": result.objective_trace[-1],
                "lipschitz": result.lipschitz,
                "trace_csv": args.out,
            }
        )
    )
    return 0


def _cmd_fig4(args):
    doc = {}
    if args.config:
        with open(args.config) as fh:
            doc = json.load(fh)
    dataset_spec = SyntheticDatasetSpec(**doc.get("dataset", {}))
    learn_doc = dict(doc.get("learn", {}))
    pursuit_iterations = learn_doc.pop("pursuit_iterations", 20)
    learn_config = LearnConfig(
        pursuit_config=PursuitConfig(iterations=int(pursuit_iterations), nonneg=True),
        beta_schedule="init-fraction",
        **learn_doc,
    )
    model_doc = doc.get("model", {})
    rows = reconstruction_experiment(
        dataset_spec=dataset_spec,
        learn_config=learn_config,
        width=int(model_doc.get("width", 16)),
        depth=int(model_doc.get("depth", 2)),
        kernel_size=int(model_doc.get("kernel_size", 3)),
    )
    os.makedirs(args.out, exist_ok=True)
    out_path = os.path.join(args.out, "fig4.csv")
    write_experiment_csv(rows, out_path)
    print(json.dumps({"rows": len(rows), "csv": out_path}))
    return 0


def _cmd_unfold_sweep(args):
    unfoldings = tuple(int(u) for u in args.unfolding.split(","))
    rows, _ = unfold_sweep(unfoldings=unfoldings, solver=args.solver, seed=args.seed)
    write_sweep_csv(rows, args.out)
    print(json.dumps({"rows": len(rows), "csv": args.out}))
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="cscbench",
        description="Convolutional sparse coding workbench",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("verify", help="run every theory check, print a JSON summary")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_verify)

    p = sub.add_parser("coherence", help="mutual coherence of a seeded kernel bank")
    p.add_argument("--kernel-size", required=True, help="e.g. 2x2 or 3")
    p.add_argument("--dilation", type=int, default=1)
    p.add_argument("--input-shape", required=True, help="e.g. 4x4 or 100")
    p.add_argument("--channels", type=int, default=1)
    p.add_argument("--width", type=int, default=1)
    p.add_argument("--padding", choices=["valid", "same"], default="valid")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_coherence)

    p = sub.add_parser("pursue", help="solve one Lasso instance, emit a trace CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", default="trace.csv")
    p.set_defaults(func=_cmd_pursue)

    p = sub.add_parser("fig4", help="dense-vs-plain reconstruction experiment")
    p.add_argument("--config", default=None)
    p.add_argument("--out", required=True, help="output directory")
    p.set_defaults(func=_cmd_fig4)

    p = sub.add_parser("unfold-sweep", help="objective/accuracy across unfolding")
    p.add_argument("--unfolding", default="0,1,2")
    p.add_argument("--solver", choices=["ista", "fista"], default="ista")
    p.add_argument("--out", default="unfold_sweep.csv")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_unfold_sweep)

    return parser


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if exc.code is not None else 2
    try:
        return args.func(args)
    except (OSError, KeyError, ValueError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
