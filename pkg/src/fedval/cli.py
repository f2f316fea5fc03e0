"""Command-line entry point.

    fedval run <config.json> [--seed N] [--out-dir DIR] [--rounds N]
    fedval sweep <sweep.json> [--out-dir DIR]
    fedval preset list
    fedval preset show <name>
    fedval gen-data <spec.json> <out.csv>
    fedval eval <model.json> <data.csv> <schema.json>

Exit codes: 0 success, 2 configuration error, 3 runtime error.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path

from .data import GROUP_A, DatasetSchema, generate_synthetic, load_csv
from .errors import ConfigError, FedValError
from .harness import ExperimentConfig, SweepSpec, preset, preset_names, run_experiment, run_sweep
from .metrics import accuracy, eod, spd
from .model import ModelParams

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_RUNTIME = 3


def _load_json(path, what: str):
    try:
        with open(path, encoding="utf-8") as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise ConfigError(f"{what} file not found: {path}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc


def _cmd_run(args) -> int:
    cfg = ExperimentConfig.load(args.config)
    if args.seed is not None:
        cfg = replace(cfg, seed=args.seed)
    if args.rounds is not None:
        cfg = replace(cfg, rounds=args.rounds)
    if args.out_dir is not None:
        cfg = replace(cfg, out_dir=args.out_dir)
    out = run_experiment(cfg)
    print(out)
    return EXIT_OK


def _cmd_sweep(args) -> int:
    raw = _load_json(args.spec, "sweep spec")
    if "base" not in raw:
        raise ConfigError("sweep spec must embed the experiment under a 'base' key")
    base = ExperimentConfig.from_dict(raw["base"])
    spec = SweepSpec.from_dict(raw)
    result = run_sweep(spec, base, out_dir=args.out_dir)
    print(result.summary_path)
    return EXIT_OK


def _cmd_preset(args) -> int:
    if args.action == "list":
        for name in preset_names():
            print(name)
        return EXIT_OK
    cfg = preset(args.name)
    print(json.dumps(cfg.to_dict(), indent=2))
    return EXIT_OK


def _cmd_gen_data(args) -> int:
    raw = _load_json(args.spec, "data spec")
    try:
        n = int(raw["n"])
        dim = int(raw["dim"])
        rates = (float(raw["positive_rates"][0]), float(raw["positive_rates"][1]))
        seed = int(raw.get("seed", 0))
    except (KeyError, TypeError, ValueError, IndexError) as exc:
        raise ConfigError(f"malformed data spec: {exc!r}") from exc
    dataset = generate_synthetic(n, dim, rates, seed)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    feature_names = [f"f{j}" for j in range(dim)]
    with open(out, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_names + ["label", "group"])
        for i in range(dataset.n):
            writer.writerow(
                [str(float(x)) for x in dataset.features[i]]
                + [str(int(dataset.labels[i])), "a" if dataset.sensitive[i] == GROUP_A else "d"]
            )
    schema = {
        "features": [{"name": name, "kind": "numeric"} for name in feature_names],
        "label": {"column": "label", "positive": "1"},
        "sensitive": {"column": "group", "advantaged": "a"},
    }
    schema_path = out.with_suffix(".schema.json")
    with open(schema_path, "w", encoding="utf-8") as fh:
        json.dump(schema, fh, indent=2)
        fh.write("\n")
    print(out)
    print(schema_path)
    return EXIT_OK


def _cmd_eval(args) -> int:
    params = ModelParams.load(args.model)
    schema = DatasetSchema.from_dict(_load_json(args.schema, "schema"))
    dataset = load_csv(args.data, schema)
    print(f"accuracy: {accuracy(params, dataset):.6f}")
    print(f"spd: {spd(params, dataset):.6f}")
    print(f"eod: {eod(params, dataset):.6f}")
    return EXIT_OK


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fedval",
        description="Deterministic federated-learning simulator with fairness-aware aggregation.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    run_p = sub.add_parser("run", help="run one experiment from a JSON config")
    run_p.add_argument("config")
    run_p.add_argument("--seed", type=int, default=None, help="override the master seed")
    run_p.add_argument("--out-dir", default=None, help="override the output directory")
    run_p.add_argument("--rounds", type=int, default=None, help="override the round count")
    run_p.set_defaults(func=_cmd_run)

    sweep_p = sub.add_parser("sweep", help="run a cooperative-count sweep")
    sweep_p.add_argument("spec")
    sweep_p.add_argument("--out-dir", default=None)
    sweep_p.set_defaults(func=_cmd_sweep)

    preset_p = sub.add_parser("preset", help="inspect registered experiment presets")
    preset_sub = preset_p.add_subparsers(dest="action", required=True)
    preset_sub.add_parser("list").set_defaults(func=_cmd_preset, action="list")
    show_p = preset_sub.add_parser("show")
    show_p.add_argument("name")
    show_p.set_defaults(func=_cmd_preset, action="show")

    gen_p = sub.add_parser("gen-data", help="write a synthetic dataset as CSV plus schema")
    gen_p.add_argument("spec")
    gen_p.add_argument("out")
    gen_p.set_defaults(func=_cmd_gen_data)

    eval_p = sub.add_parser("eval", help="report accuracy/spd/eod for a saved model")
    eval_p.add_argument("model")
    eval_p.add_argument("data")
    eval_p.add_argument("schema")
    eval_p.set_defaults(func=_cmd_eval)
    return parser


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except FedValError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
