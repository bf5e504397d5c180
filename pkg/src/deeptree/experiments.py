"""Multi-trial experiments: deep pipeline versus baselines, and census coupling decay.

Each trial draws its own seed from the master seed and its (grid point,
trial) position, so results do not depend on how trials are spread over
worker processes. Timing lives in a separate file so reports stay
byte-identical across runs.
"""
from __future__ import annotations

import concurrent.futures
import csv
import dataclasses
import itertools
import json
import math
import os
import time
import traceback
from collections.abc import Callable, Sequence

import numpy as np

from .baselines import BaselineKind, classify
from .core import ModelParams, Regime, TreeTopology, Variant
from .rng import derive_seed, stream
from .samplers import InstanceSpec, apply_channel, generate_instance, make_dataset, random_rewiring, sample
from .reconstruct.distances import cross_agreement
from .reconstruct.tree import reconstruct_tree
from .scoring import label_accuracy, reconstruction_summary

DEEP = "deep"
METHODS = (DEEP,) + tuple(k.value for k in BaselineKind)
Z95 = 1.959963984540054


def wilson_interval(p: float, n: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a proportion ``p`` observed over ``n`` trials."""
    if n < 1:
        raise ValueError("interval needs at least one trial")
    denom = 1.0 + z * z / n
    centre = (p + z * z / (2 * n)) / denom
    half = z * math.sqrt(max(p * (1 - p), 0.0) / n + z * z / (4 * n * n)) / denom
    return max(0.0, min(p, centre - half)), min(1.0, max(p, centre + half))


@dataclasses.dataclass(frozen=True)
class ExperimentConfig:
    """Grid of model settings plus the trial plan.

    Each entry of ``model``, ``tree`` and ``instance`` may be a single value or
    a list; the grid is their Cartesian product in key order.
    """

    model: dict
    tree: dict
    instance: dict
    trials: int
    seed: int = 0
    methods: tuple[str, ...] = METHODS
    r: int = 2
    min_count: int = 30
    reference: dict = dataclasses.field(
        default_factory=lambda: {"C_local": 1.0, "C_shallow": 1.0, "c_shallow": 1.0}
    )

    def __post_init__(self):
        if int(self.trials) < 1:
            raise ValueError("an experiment needs at least one trial")
        methods = tuple(self.methods)
        unknown = [m for m in methods if m not in METHODS]
        if unknown or not methods:
            raise ValueError(f"unknown methods {unknown}; choose from {METHODS}")
        object.__setattr__(self, "methods", methods)
        for key in ("variant", "q", "k", "lambda"):
            if key not in self.model:
                raise ValueError(f"model.{key} is required")
        for key in ("d", "h"):
            if key not in self.tree:
                raise ValueError(f"tree.{key} is required")
        for key in ("h0", "h1"):
            if key not in self.instance:
                raise ValueError(f"instance.{key} is required")
        if not self.grid():
            raise ValueError("empty parameter grid")

    @classmethod
    def from_dict(cls, raw: dict) -> "ExperimentConfig":
        return cls(
            model=dict(raw["model"]),
            tree=dict(raw["tree"]),
            instance=dict(raw["instance"]),
            trials=int(raw["trials"]),
            seed=int(raw.get("seed", 0)),
            methods=tuple(raw.get("methods", METHODS)),
            r=int(raw.get("reconstruct", {}).get("r", 2)),
            min_count=int(raw.get("reconstruct", {}).get("min_count", 30)),
            reference={"C_local": 1.0, "C_shallow": 1.0, "c_shallow": 1.0, **raw.get("reference", {})},
        )

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        with open(path, encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def grid(self) -> list[dict]:
        axes = []
        for section in (self.model, self.tree, self.instance):
            for key, value in section.items():
                values = value if isinstance(value, list) else [value]
                axes.append([(key, v) for v in values])
        return [dict(combo) for combo in itertools.product(*axes)]


@dataclasses.dataclass(frozen=True)
class Report:
    trials: list[dict]
    summary: list[dict]
    diagnostics: dict
    timing: dict = dataclasses.field(default_factory=dict, compare=False)

    @property
    def any_failure(self) -> bool:
        return any(row["failed"] for row in self.trials)

    def write(self, out_dir) -> None:
        os.makedirs(out_dir, exist_ok=True)
        _write_csv(os.path.join(out_dir, "trials.csv"), self.trials)
        _write_csv(os.path.join(out_dir, "summary.csv"), self.summary)
        with open(os.path.join(out_dir, "report.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump({"summary": self.summary, "diagnostics": self.diagnostics}, fh, indent=2, sort_keys=True)
            fh.write("\n")
        with open(os.path.join(out_dir, "timing.json"), "w", encoding="utf-8", newline="\n") as fh:
            json.dump(self.timing, fh, indent=2, sort_keys=True)
            fh.write("\n")


def _write_csv(path, rows: list[dict]) -> None:
    fields: list[str] = []
    for row in rows:
        fields += [f for f in row if f not in fields]
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
        writer.writeheader()
        for row in rows:
            writer.writerow({f: _cell(row.get(f)) for f in fields})


def _cell(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return repr(value)
    return value


# -- separation experiment -------------------------------------------------------------


def _trial_params(point: dict, seed: int) -> ModelParams:
    variant = Variant(point["variant"])
    rewiring = random_rewiring(point["k"], point["h"], seed) if variant is Variant.FIM else None
    return ModelParams(
        variant,
        int(point["q"]),
        int(point["k"]),
        float(point["lambda"]),
        regime=Regime(point.get("regime", "random")),
        rewiring=rewiring,
        seed=seed,
    )


def run_trial(task) -> tuple[dict, float]:
    """One trial: sample, run every method, score on the unlabeled leaves."""
    grid_index, point, trial, seed, methods, r, min_count = task
    start = time.perf_counter()
    row = {"grid": grid_index, "trial": trial, "seed": seed, **point, "failed": False, "error": None}
    try:
        tree = TreeTopology(int(point["d"]), int(point["h"]))
        params = _trial_params(point, seed)
        truth = sample(tree, params)
        labels, S = generate_instance(tree, InstanceSpec(int(point["h0"]), int(point["h1"])), seed)
        truth = truth.with_instance(labels, S)
        data = make_dataset(truth)
        depth = 2 * (tree.h - int(point["h1"]))
        agree = None
        for method in methods:
            if method == DEEP:
                result = reconstruct_tree(data, params, r=r, min_count=min_count)
                summ = reconstruction_summary(result, data, truth)
                row["acc_deep"] = summ.pop("accuracy")
                row["deep_ok"] = summ.pop("ok")
                row["deep_topology"] = summ.pop("topology")
                row["deep_failure"] = summ.pop("failure")
                row.update({f"deep_{k}": v for k, v in summ.items()})
                levels = result.diagnostics.get("levels", [])
                margins = [lv["min_margin"] for lv in levels if isinstance(lv["min_margin"], float)]
                row["deep_min_margin"] = min(margins) if margins else None
                row["failed"] = row["failed"] or not row["deep_ok"]
            else:
                if BaselineKind(method).is_local and agree is None and len(data.labels):
                    # shared by both local classifiers
                    agree = cross_agreement(data.unlabeled_reps, data.labeled_reps)
                pred = classify(data, method, lam=params.lam, depth=depth, agree=agree)
                row[f"acc_{method}"] = label_accuracy(pred, data, truth)
    except Exception as exc:  # recorded, never dropped
        row["failed"] = True
        row["error"] = f"{type(exc).__name__}: {exc}"
        row["traceback"] = traceback.format_exc(limit=3)
    return row, time.perf_counter() - start


def _summarize(config: ExperimentConfig, grid: list[dict], rows: list[dict]) -> list[dict]:
    ref = config.reference
    out = []
    for g, point in enumerate(grid):
        mine = [row for row in rows if row["grid"] == g]
        n = len(mine)
        d, h, h0, h1 = (int(point[key]) for key in ("d", "h", "h0", "h1"))
        q, k, lam = int(point["q"]), int(point["k"]), float(point["lambda"])
        trivial = d ** (-h0)
        srow = {"grid": g, **point, "trials": n, "failures": sum(row["failed"] for row in mine)}
        for method in config.methods:
            accs = [row.get(f"acc_{method}") for row in mine]
            accs = [0.0 if a is None else float(a) for a in accs]
            mean = float(np.mean(accs)) if accs else 0.0
            lo, hi = wilson_interval(mean, max(n, 1))
            srow[f"{method}_mean"] = mean
            srow[f"{method}_ci_low"] = lo
            srow[f"{method}_ci_high"] = hi
        if DEEP in config.methods:
            rate = float(np.mean([bool(row.get("deep_topology")) for row in mine]))
            lo, hi = wilson_interval(rate, max(n, 1))
            srow["deep_recovery_rate"] = rate
            srow["deep_recovery_ci_low"] = lo
            srow["deep_recovery_ci_high"] = hi
        srow["trivial_rate"] = trivial
        srow["local_bound_reference"] = trivial * (1 + ref["C_local"] * k * lam ** (h - h1) * q)
        srow["shallow_bound_reference"] = trivial + ref["C_shallow"] * k * d**h0 * math.exp(
            -ref["c_shallow"] * (h - h1)
        )
        srow["d_lambda_sq"] = d * lam * lam
        out.append(srow)
    return out


def run_separation_experiment(
    config: ExperimentConfig, workers: int = 1, progress: Callable[[int, int], None] | None = None
) -> Report:
    grid = config.grid()
    tasks = [
        (g, point, t, derive_seed(config.seed, "trial", g, t), config.methods, config.r, config.min_count)
        for g, point in enumerate(grid)
        for t in range(config.trials)
    ]
    start = time.perf_counter()
    results = []
    if workers <= 1:
        for i, task in enumerate(tasks):
            results.append(run_trial(task))
            if progress:
                progress(i + 1, len(tasks))
    else:
        with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
            for i, res in enumerate(pool.map(run_trial, tasks)):
                results.append(res)
                if progress:
                    progress(i + 1, len(tasks))
    rows = [row for row, _ in results]
    summary = _summarize(config, grid, rows)
    diagnostics = {
        "config": {
            "model": config.model,
            "tree": config.tree,
            "instance": config.instance,
            "trials": config.trials,
            "seed": config.seed,
            "methods": list(config.methods),
            "r": config.r,
            "reference_constants": config.reference,
            "reference_note": "bound columns are reference shapes with configured constants",
        },
        "failures": [
            {"grid": row["grid"], "trial": row["trial"], "reason": row.get("deep_failure") or row.get("error")}
            for row in rows
            if row["failed"]
        ],
    }
    timing = {
        "total_seconds": time.perf_counter() - start,
        "workers": workers,
        "trial_seconds": [secs for _, secs in results],
    }
    return Report(rows, summary, diagnostics, timing)


# -- census total-variation experiment ----------------------------------------------------------


def census_sampler(d: int, h: int, q: int, k: int, lam: float, root) -> Callable[[np.random.Generator, int], np.ndarray]:
    """Draw leaf censuses below a fixed root: counts of each full leaf string, shape ``(n, q**k)``."""
    root = np.asarray(root, dtype=np.int64)
    if root.shape != (k,):
        raise ValueError("root must have length k")
    if q**k > 1 << 20:
        raise ValueError("census over q**k strings is too large")

    def draw(rng: np.random.Generator, n: int) -> np.ndarray:
        level = np.broadcast_to(root, (n, 1, k)).copy()
        for _ in range(h):
            parents = np.repeat(level, d, axis=1)
            level = apply_channel(parents, lam, q, rng.random(parents.shape))
        codes = np.zeros(level.shape[:2], dtype=np.int64)
        for c in range(k):
            codes = codes * q + level[:, :, c]
        out = np.zeros((n, q**k), dtype=np.int64)
        np.add.at(out, (np.repeat(np.arange(n), codes.shape[1]), codes.ravel()), 1)
        return out

    return draw


def _tv(counts_a: np.ndarray, counts_b: np.ndarray) -> float:
    pa = counts_a / counts_a.sum()
    pb = counts_b / counts_b.sum()
    return 0.5 * float(np.abs(pa - pb).sum())


def estimate_tv_distance(
    sampler_a: Callable,
    sampler_b: Callable,
    n_samples: int,
    seed: int = 0,
    n_boot: int = 200,
) -> tuple[float, float]:
    """Plug-in total variation between two samplers' outcome distributions, with bootstrap SE.

    Samplers take ``(rng, n)`` and return ``n`` outcomes, one per row (or a
    1-d array of scalar outcomes).
    """
    if n_samples < 100:
        raise ValueError("n_samples must be at least 100")
    xa = np.asarray(sampler_a(stream(seed, "tv", 0), n_samples))
    xb = np.asarray(sampler_b(stream(seed, "tv", 1), n_samples))
    xa = xa.reshape(n_samples, -1)
    xb = xb.reshape(n_samples, -1)
    both = np.concatenate([xa, xb])
    _, inverse = np.unique(both, axis=0, return_inverse=True)
    inverse = inverse.reshape(-1)
    m = int(inverse.max()) + 1
    ca = np.bincount(inverse[:n_samples], minlength=m)
    cb = np.bincount(inverse[n_samples:], minlength=m)
    tv = _tv(ca, cb)
    rng = stream(seed, "bootstrap")
    boots = [
        _tv(rng.multinomial(n_samples, ca / n_samples), rng.multinomial(n_samples, cb / n_samples))
        for _ in range(n_boot)
    ]
    return tv, float(np.std(boots, ddof=1))


def run_count_tv_experiment(
    d: int, lam: float, q: int, k: int, h_list: Sequence[int], n_samples: int, seed: int = 0
) -> list[dict]:
    """TV between leaf censuses under two different fixed roots, for each height."""
    root_a = np.zeros(k, dtype=np.int64)
    root_b = np.ones(k, dtype=np.int64)
    rows = []
    for h in h_list:
        tv, se = estimate_tv_distance(
            census_sampler(d, h, q, k, lam, root_a),
            census_sampler(d, h, q, k, lam, root_b),
            n_samples,
            seed=derive_seed(seed, "tv", h),
        )
        rows.append(
            {
                "h": int(h),
                "tv": tv,
                "se": se,
                "d": d,
                "lambda": lam,
                "q": q,
                "k": k,
                "samples": n_samples,
                "d_lambda_sq": d * lam * lam,
                "regime": "above" if d * lam * lam > 1 else "below",
            }
        )
    return rows


def write_count_tv(rows: list[dict], path) -> None:
    """CSV at ``path`` and the same rows as JSON next to it."""
    path = os.fspath(path)
    _write_csv(path, rows)
    stem = path[:-4] if path.endswith(".csv") else path
    with open(stem + ".json", "w", encoding="utf-8", newline="\n") as fh:
        json.dump({"rows": rows}, fh, indent=2, sort_keys=True)
        fh.write("\n")
