"""Repeated seeded runs, mean/std aggregation and one-parameter sweeps.

Layout written by :func:`run_experiment`::

    out/
      run_000/report.json  objective.csv  alpha.csv (dmclusts only)
      run_001/...
      aggregate.json
      timing.csv

Wall times live only in ``timing.csv`` so every other file is a pure function
of the configuration and seed.
"""

from __future__ import annotations

import configparser
import csv
import json
import logging
import math
import os
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from . import dmf as dmf_mod
from .clustering import extract_clusterings
from .core import ConfigError, DivergenceError, SolverConfig, fit
from .dataset import (DatasetError, MultiViewDataset, PlantedTruth, StructureSpec,
                      add_noise_view, generate_synthetic, load_dataset, load_truth, zscore)
from .metrics import evaluate
from .seminmf import seminmf_fit

logger = logging.getLogger(__name__)

METHODS = ("dmclusts", "dmf", "seminmf")
SWEEP_PARAMS = {"lambda": "lam", "r": "r", "beta": "beta"}

DEFAULT_GRIDS = {
    "lambda": [10.0 ** e for e in range(-4, 5)],
    "r": [5.0 * 10.0 ** e for e in range(-4, 1)],
    "beta": [round(0.1 * i, 1) for i in range(11)],
}


@dataclass
class SynthSpec:
    n: int = 500
    structures: int = 2
    views_per: int = 2
    k: int = 3
    d: int = 30
    separation: float = 10.0
    sigma: float = 0.5
    noise_view: int = 0
    seed: int = 0

    def structure_specs(self) -> list:
        return [StructureSpec(self.k, tuple(range(s * self.views_per, (s + 1) * self.views_per)),
                              self.d, self.separation, self.sigma)
                for s in range(self.structures)]

    def build(self) -> tuple:
        if self.structures < 1 or self.views_per < 1:
            raise DatasetError("need at least one structure and one view per structure")
        ds, truth = generate_synthetic(self.n, self.structure_specs(), seed=self.seed)
        if self.noise_view:
            ds = add_noise_view(ds, self.noise_view, seed=self.seed + 1)
        return ds, truth


@dataclass
class ExperimentConfig:
    solver: SolverConfig
    dataset: str | None = None
    synth: SynthSpec = field(default_factory=SynthSpec)
    zscore: bool = False
    method: str = "dmclusts"
    repeats: int = 10
    seed: int = 0
    out: str = "out"
    sweep: str | None = None
    values: list | None = None

    def validate(self) -> None:
        if self.repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; choose from {METHODS}")
        if self.sweep is not None:
            if self.sweep not in SWEEP_PARAMS:
                raise ConfigError(
                    f"cannot sweep {self.sweep!r}; choose from {sorted(SWEEP_PARAMS)}")
            for v in self.sweep_values():
                # every value must yield a valid solver config
                replace(self.solver, **{SWEEP_PARAMS[self.sweep]: v})

    def sweep_values(self) -> list:
        if self.values:
            return [float(v) for v in self.values]
        return list(DEFAULT_GRIDS[self.sweep])


# --------------------------------------------------------------------------
# config files
# --------------------------------------------------------------------------

def read_config_file(path: str | os.PathLike) -> dict:
    """Flatten a ``[dataset]``/``[solver]``/``[experiment]`` key=value file.

    Keys use the CLI flag names with underscores (``max_iter``, ``views_per``);
    values are returned as strings.
    """
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    if not parser.read(path, encoding="utf-8"):
        raise ConfigError(f"cannot read config file {path}")
    known = {"dataset", "solver", "experiment"}
    out = {}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key, value in parser[section].items():
            out[key.replace("-", "_")] = value.strip().strip('"').strip("'")
    return out


# --------------------------------------------------------------------------
# single runs
# --------------------------------------------------------------------------

def prepare_dataset(cfg: ExperimentConfig) -> tuple:
    if cfg.dataset:
        ds, truth = load_dataset(cfg.dataset), load_truth(cfg.dataset)
    else:
        ds, truth = cfg.synth.build()
    if cfg.zscore:
        ds = zscore(ds)
    return ds, truth


def fit_method(ds: MultiViewDataset, method: str, solver: SolverConfig) -> dict:
    """Fit one model; returns representations, view weights and objective rows."""
    if method == "dmclusts":
        res = fit(ds, solver)
        return {"H": res.state.H, "alpha": res.state.alpha, "objective": res.objective_rows,
                "n_iter": res.n_iter, "converged": res.converged}
    if method == "dmf":
        st = dmf_mod.dmf_fit(ds, solver)
        rows = [{"iteration": t, "total": h, "reconstruction": h, "redundancy": 0.0}
                for t, h in enumerate(st.history)]
        return {"H": st.H, "alpha": None, "objective": rows,
                "n_iter": st.n_iter, "converged": st.converged}
    if method == "seminmf":
        X = dmf_mod.concat_views(ds)
        res = seminmf_fit(X, solver.layer_sizes[0], max_iter=solver.pretrain_iter,
                          tol=solver.tol, seed=solver.seed)
        rows = [{"iteration": t, "total": h, "reconstruction": h, "redundancy": 0.0}
                for t, h in enumerate(res.history)]
        return {"H": [res.H], "alpha": None, "objective": rows,
                "n_iter": res.n_iter, "converged": True}
    raise ConfigError(f"unknown method {method!r}")


def _solver_meta(solver: SolverConfig) -> dict:
    d = asdict(solver)
    d["layer_sizes"] = list(solver.layer_sizes)
    return d


def single_run(ds: MultiViewDataset, truth: PlantedTruth | None, method: str,
               solver: SolverConfig) -> dict:
    """Fit, cluster every layer and evaluate. Divergence is reported, not raised."""
    meta = {"method": method, "seed": solver.seed, "config": _solver_meta(solver)}
    try:
        res = fit_method(ds, method, solver)
    except DivergenceError as exc:
        logger.warning("run with seed %d diverged: %s", solver.seed, exc)
        meta.update(status="diverged", iteration=exc.iteration, error=str(exc))
        return {"report": {"meta": meta}, "fit": None}
    clusterings = extract_clusterings(res["H"], solver.k, seed=solver.seed, n_init=solver.n_init)
    meta.update(status="ok", iterations=res["n_iter"], converged=res["converged"])
    report = evaluate(ds, clusterings, truth, meta)
    return {"report": report.to_dict(), "fit": res, "clusterings": clusterings}


def report_metrics(report: dict) -> dict:
    """Scalar metrics of one run report, keyed for aggregation."""
    out = {}
    q = report.get("quality", {}).get("mean", {})
    for key in ("sc", "di"):
        if key in q:
            out[key] = q[key]
    d = report.get("diversity", {}).get("mean", {})
    for key in ("nmi", "jc"):
        if key in d:
            out[key] = d[key]
    for tm in report.get("truth_match") or []:
        out[f"truth{tm['truth']}_nmi"] = tm["nmi"]
    if "iterations" in report.get("meta", {}):
        out["iterations"] = report["meta"]["iterations"]
    return out


def aggregate(reports: list) -> dict:
    """Mean and population std (ddof=0) of every metric over completed runs."""
    done = [r for r in reports if r.get("meta", {}).get("status") == "ok"]
    per_run = [report_metrics(r) for r in done]
    keys = []
    for m in per_run:
        keys.extend(k for k in m if k not in keys)
    metrics = {}
    for k in keys:
        vals = np.array([m[k] for m in per_run if k in m], dtype=np.float64)
        metrics[k] = {"mean": _finite(vals.mean()), "std": _finite(vals.std()),
                      "count": int(vals.size)}
    return {"completed": len(done), "failed": len(reports) - len(done), "metrics": metrics}


def _finite(x):
    x = float(x)
    return x if math.isfinite(x) else None


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        obj = obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def write_json(path: Path, obj) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        json.dump(_jsonable(obj), fh, indent=2, allow_nan=False)
        fh.write("\n")


def _write_csv(path: Path, header: list, rows: list) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def _fmt(x) -> str:
    if x is None:
        return "nan"
    return repr(float(x))


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def run_experiment(cfg: ExperimentConfig, ds: MultiViewDataset | None = None,
                   truth: PlantedTruth | None = None, out: str | os.PathLike | None = None) -> dict:
    """``cfg.repeats`` runs with seeds ``cfg.seed + i``, written under *out*.

    Returns the aggregate dictionary (also saved as ``aggregate.json``).
    """
    cfg.validate()
    if ds is None:
        ds, truth = prepare_dataset(cfg)
    cfg.solver.validate(ds)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    reports, timing = [], []
    for i in range(cfg.repeats):
        solver = replace(cfg.solver, seed=cfg.seed + i)
        t0 = time.perf_counter()
        run = single_run(ds, truth, cfg.method, solver)
        timing.append([i, solver.seed, f"{time.perf_counter() - t0:.6f}"])
        rdir = out / f"run_{i:03d}"
        rdir.mkdir(exist_ok=True)
        write_json(rdir / "report.json", run["report"])
        if run["fit"] is not None:
            rows = [[r["iteration"], _fmt(r["total"]), _fmt(r["reconstruction"]),
                     _fmt(r["redundancy"])] for r in run["fit"]["objective"]]
            _write_csv(rdir / "objective.csv",
                       ["iteration", "total", "reconstruction", "redundancy"], rows)
            alpha = run["fit"]["alpha"]
            if alpha is not None:
                _write_csv(rdir / "alpha.csv", ["clustering", *ds.view_names],
                           [[m, *(_fmt(a) for a in row)] for m, row in enumerate(alpha)])
        reports.append(run["report"])
    agg = aggregate(reports)
    agg["method"] = cfg.method
    agg["repeats"] = cfg.repeats
    agg["seeds"] = [cfg.seed + i for i in range(cfg.repeats)]
    write_json(out / "aggregate.json", agg)
    _write_csv(out / "timing.csv", ["run", "seed", "seconds"], timing)
    return agg


def sweep(cfg: ExperimentConfig, ds: MultiViewDataset | None = None,
          truth: PlantedTruth | None = None, out: str | os.PathLike | None = None) -> list:
    """Run a full experiment per value of ``cfg.sweep`` and write ``sweep_<param>.csv``.

    Each row holds the value, mean and std of DI and of diversity
    ``1 - NMI`` over completed runs, and a note. A value whose runs all
    fail gives NaN statistics and the failure in the note.
    """
    cfg.validate()
    if cfg.sweep is None:
        raise ConfigError("no sweep parameter given")
    if ds is None:
        ds, truth = prepare_dataset(cfg)
    out = Path(out if out is not None else cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    attr = SWEEP_PARAMS[cfg.sweep]
    rows = []
    for j, value in enumerate(cfg.sweep_values()):
        sub = replace(cfg, solver=replace(cfg.solver, **{attr: value}), sweep=None, values=None)
        vdir = out / f"{cfg.sweep}_{j:02d}"
        try:
            agg = run_experiment(sub, ds, truth, out=vdir)
        except (ConfigError, DatasetError, ValueError, FloatingPointError) as exc:
            rows.append({"value": value, "di_mean": None, "di_std": None,
                         "div_mean": None, "div_std": None, "note": f"error: {exc}",
                         "completed": 0})
            continue
        div = _diversity(vdir, cfg.repeats)
        di = agg["metrics"].get("di", {})
        note = "" if agg["failed"] == 0 else f"{agg['failed']} of {cfg.repeats} runs diverged"
        rows.append({"value": value, "di_mean": di.get("mean"), "di_std": di.get("std"),
                     "div_mean": _finite(np.mean(div)) if div else None,
                     "div_std": _finite(np.std(div)) if div else None,
                     "note": note, "completed": agg["completed"]})
    _write_csv(out / f"sweep_{cfg.sweep}.csv",
               ["value", "di_mean", "di_std", "div_mean", "div_std", "note"],
               [[_fmt(r["value"]), _fmt(r["di_mean"]), _fmt(r["di_std"]),
                 _fmt(r["div_mean"]), _fmt(r["div_std"]), r["note"]] for r in rows])
    return rows


def _diversity(vdir: Path, repeats: int) -> list:
    """Per-run ``1 - mean pairwise NMI`` read back from the run reports."""
    out = []
    for i in range(repeats):
        with open(vdir / f"run_{i:03d}" / "report.json", encoding="utf-8") as fh:
            rep = json.load(fh)
        mean = rep.get("diversity", {}).get("mean", {})
        if "nmi" in mean:
            out.append(1.0 - mean["nmi"])
    return out
