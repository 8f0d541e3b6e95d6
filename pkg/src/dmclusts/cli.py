"""Command-line entry point: ``synth``, ``run``, ``sweep`` and ``eval``.

Settings come from built-in defaults, then an optional ``--config`` file, then
flags, each overriding the previous. Exit codes: 0 success, 2 configuration
or usage error, 3 every run diverged.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .clustering import Clustering
from .core import ConfigError, SolverConfig
from .dataset import DatasetError, load_dataset, load_truth, read_labels, save_dataset
from .harness import (METHODS, SWEEP_PARAMS, ExperimentConfig, SynthSpec, prepare_dataset,
                      read_config_file, run_experiment, sweep, write_json)
from .metrics import evaluate

EXIT_OK, EXIT_CONFIG, EXIT_DIVERGED = 0, 2, 3

# key -> (type, default); keys double as config-file keys
SETTINGS = {
    "dataset": (str, None),
    "zscore": ("bool", False),
    "n": (int, 500),
    "structures": (int, 2),
    "views_per": (int, 2),
    "d": (int, 30),
    "separation": (float, 10.0),
    "sigma": (float, 0.5),
    "noise_view": (int, 0),
    "method": (str, "dmclusts"),
    "clusterings": (int, None),
    "clusters": (int, 3),
    "layers": ("ints", None),
    "lambda": (float, 0.01),
    "beta": (float, 0.4),
    "r": (float, 0.5),
    "max_iter": (int, 100),
    "tol": (float, 1e-5),
    "repeats": (int, 10),
    "seed": (int, 0),
    "out": (str, None),
    "sweep": (str, None),
    "values": ("floats", None),
}


def _convert(kind, raw):
    if raw is None or not isinstance(raw, str):
        return raw
    try:
        if kind == "bool":
            low = raw.strip().lower()
            if low in ("1", "true", "yes", "on"):
                return True
            if low in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        if kind == "ints":
            return [int(x) for x in raw.split(",") if x.strip()]
        if kind == "floats":
            return [float(x) for x in raw.split(",") if x.strip()]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"cannot parse {raw!r}") from None


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="key=value file with [dataset], [solver], [experiment]")
    p.add_argument("--seed", help="base seed (default 0)")
    p.add_argument("--out", help="output directory")
    p.add_argument("-v", "--verbose", action="store_true")


def _add_data(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("dataset")
    g.add_argument("--dataset", help="manifest.json of a saved dataset")
    g.add_argument("--zscore", nargs="?", const="true", help="standardize every feature")
    g.add_argument("--n", help="samples of a synthetic dataset")
    g.add_argument("--structures", help="planted labelings")
    g.add_argument("--views-per", dest="views_per", help="views encoding each labeling")
    g.add_argument("--d", help="features per view")
    g.add_argument("--separation", help="distance between cluster means")
    g.add_argument("--sigma", help="noise standard deviation")
    g.add_argument("--noise-view", dest="noise_view", help="append a Gaussian view of this dimension")


def _add_solver(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("solver")
    g.add_argument("--method", help=f"one of {', '.join(METHODS)}")
    g.add_argument("--clusterings", help="number of clusterings M (default 2)")
    g.add_argument("--clusters", help="clusters k per clustering")
    g.add_argument("--layers", help="layer sizes K1,K2,...")
    g.add_argument("--lambda", dest="lambda", help="redundancy weight")
    g.add_argument("--beta", help="balance of the redundancy term")
    g.add_argument("--r", help="view-weight exponent")
    g.add_argument("--max-iter", dest="max_iter")
    g.add_argument("--tol")
    g.add_argument("--repeats", help="seeded runs (default 10)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="dmclusts",
                                     description="Multiple clusterings of multi-view data.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="write a synthetic multi-view dataset")
    _add_common(p)
    _add_data(p)
    p.add_argument("--clusters", help="clusters per planted labeling")

    p = sub.add_parser("run", help="repeated seeded runs with aggregation")
    _add_common(p)
    _add_data(p)
    _add_solver(p)

    p = sub.add_parser("sweep", help="vary one parameter, write a sweep CSV")
    _add_common(p)
    _add_data(p)
    _add_solver(p)
    p.add_argument("--sweep", help=f"parameter, one of {', '.join(SWEEP_PARAMS)}")
    p.add_argument("--values", help="comma-separated values (default: standard grid)")

    p = sub.add_parser("eval", help="score existing label files")
    _add_common(p)
    p.add_argument("--dataset", required=True)
    p.add_argument("--labels", nargs="+", required=True, help="one label file per clustering")
    return parser


def resolve(args: argparse.Namespace) -> dict:
    """Defaults < config file < flags."""
    values = {k: default for k, (_, default) in SETTINGS.items()}
    if getattr(args, "config", None):
        for k, raw in read_config_file(args.config).items():
            if k not in SETTINGS:
                raise ConfigError(f"unknown config key {k!r}")
            values[k] = _convert(SETTINGS[k][0], raw)
    for k in SETTINGS:
        raw = getattr(args, k, None)
        if raw is not None:
            values[k] = _convert(SETTINGS[k][0], raw)
    return values


def synth_spec(values: dict) -> SynthSpec:
    return SynthSpec(n=values["n"], structures=values["structures"],
                     views_per=values["views_per"], k=values["clusters"], d=values["d"],
                     separation=values["separation"], sigma=values["sigma"],
                     noise_view=values["noise_view"], seed=values["seed"])


def default_layers(M: int, k: int, max_size: int) -> list:
    """Halve from the largest admissible size, never below k."""
    return [max(k, max_size // 2 ** m) for m in range(M)]


def experiment_config(values: dict, command: str) -> tuple:
    cfg = ExperimentConfig(solver=None, dataset=values["dataset"],  # type: ignore[arg-type]
                           synth=synth_spec(values), zscore=bool(values["zscore"]),
                           method=values["method"], repeats=values["repeats"],
                           seed=values["seed"], out=values["out"] or f"{command}_out",
                           sweep=values["sweep"], values=values["values"])
    if cfg.method not in METHODS:
        raise ConfigError(f"unknown method {cfg.method!r}")
    ds, truth = prepare_dataset(cfg)
    layers = values["layers"]
    M = values["clusterings"]
    if layers is None:
        layers = default_layers(M or 2, values["clusters"], min(min(ds.dims), ds.n))
    elif M is not None and M != len(layers):
        raise ConfigError(f"--clusterings {M} but {len(layers)} layer sizes given")
    cfg.solver = SolverConfig(tuple(layers), values["clusters"], lam=values["lambda"],
                              beta=values["beta"], r=values["r"], max_iter=values["max_iter"],
                              tol=values["tol"], seed=values["seed"])
    cfg.solver.validate(ds)
    cfg.validate()
    return cfg, ds, truth


def cmd_synth(values: dict) -> int:
    spec = synth_spec(values)
    ds, truth = spec.build()
    path = save_dataset(ds, values["out"] or "synth_out", truth)
    print(path)
    return EXIT_OK


def cmd_run(values: dict) -> int:
    cfg, ds, truth = experiment_config(values, "run")
    agg = run_experiment(cfg, ds, truth)
    for name, stat in agg["metrics"].items():
        print(f"{name:>12s}  {stat['mean']!s:>22s} +- {stat['std']!s}")
    print(f"completed {agg['completed']} / {cfg.repeats} -> {cfg.out}")
    return EXIT_DIVERGED if agg["completed"] == 0 else EXIT_OK


def cmd_sweep(values: dict) -> int:
    if values["sweep"] is None:
        raise ConfigError("sweep needs --sweep")
    cfg, ds, truth = experiment_config(values, "sweep")
    rows = sweep(cfg, ds, truth)
    for r in rows:
        print(f"{r['value']:<10g} DI {r['di_mean']}  1-NMI {r['div_mean']}  {r['note']}")
    return EXIT_DIVERGED if all(r["completed"] == 0 for r in rows) else EXIT_OK


def cmd_eval(args: argparse.Namespace, values: dict) -> int:
    ds = load_dataset(args.dataset)
    truth = load_truth(args.dataset)
    clusterings = []
    for path in args.labels:
        raw = read_labels(path)
        if raw.size != ds.n:
            raise DatasetError(f"{path}: {raw.size} labels for {ds.n} samples")
        _, labels = np.unique(raw, return_inverse=True)
        clusterings.append(Clustering(labels, int(labels.max()) + 1))
    report = evaluate(ds, clusterings, truth, {"label_files": list(args.labels)})
    out = Path(values["out"] or "eval_out")
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "report.json", report.to_dict())
    print(f"SC {report.mean_sc:.4f}  DI {report.mean_di:.4f}  NMI {report.mean_nmi:.4f}"
          f"  JC {report.mean_jc:.4f}")
    return EXIT_OK


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        values = resolve(args)
        if args.command == "synth":
            return cmd_synth(values)
        if args.command == "run":
            return cmd_run(values)
        if args.command == "sweep":
            return cmd_sweep(values)
        return cmd_eval(args, values)
    except (ConfigError, DatasetError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
