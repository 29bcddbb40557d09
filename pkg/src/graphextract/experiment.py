"""Experiment orchestration: config files, sweeps over selectors x
budgets x seeds, result CSVs, reference-gap and ablation batches, and
summary tables.

One extraction run per (selector, seed) pair suffices for every budget:
with budgets aligned to whole cycles the query sequence of a smaller
budget is an exact prefix of the larger one, so per-budget results come
from retraining the final surrogate on prefixes of one queried sequence.
"""

import hashlib
import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, replace

import numpy as np

from .datagen import SbmConfig, generate_sbm, split_partition
from .dataio import load_dataset
from .errors import ConfigError, UsageError
from .extraction import (
    ExtractionConfig,
    QueryOracle,
    evaluate,
    run_extraction,
    train_final,
    train_target,
)
from .gcn import TrainConfig
from .graph import FeatureMatrix, induced_subgraph
from .rng import substream_seed
from .scoring import DiversityConfig, PageRankConfig, PerturbationConfig
from .selection import AgeConfig, WeightSchedule

__all__ = [
    "ExperimentSpec",
    "parse_spec",
    "serialize_spec",
    "spec_digest",
    "run_experiment",
    "sweep_gap",
    "run_ablate",
    "report",
]

RESULTS_FILE = "results.csv"
TRAJECTORY_FILE = "trajectory.csv"
REFERENCE_FILE = "reference.csv"
GAPS_FILE = "gaps.csv"
ABLATION_FILE = "ablation.csv"
CONFIG_DUMP = "config.json"
FAILURES_FILE = "failures.txt"

ABLATION_VARIANTS = (
    ("full", None),
    ("no_centrality", "centrality"),
    ("no_uncertainty", "uncertainty"),
    ("no_diversity", "diversity"),
)


@dataclass(frozen=True)
class ExperimentSpec:
    """A full sweep: dataset source, partition fractions, extraction
    settings, and the selector/budget/seed grid."""

    dataset_path: str | None
    sbm: SbmConfig | None
    pool_fraction: float
    train_fraction: float
    allow_overlap: bool
    extraction: ExtractionConfig
    budgets: tuple
    selectors: tuple
    seeds: tuple
    output_dir: str
    target_epochs: int = 1000
    final_epochs: int = 1000

    def __post_init__(self):
        if (self.dataset_path is None) == (self.sbm is None):
            raise ConfigError("dataset: give exactly one of a path or an sbm block")
        if not self.budgets:
            raise ConfigError("budgets: must be non-empty")
        if any(b2 <= b1 for b1, b2 in zip(self.budgets, self.budgets[1:])):
            raise ConfigError("budgets: must be strictly increasing")
        if self.budgets[0] < self.extraction.initial_budget:
            raise ConfigError(
                f"budgets: smallest budget {self.budgets[0]} is below the "
                f"initial budget {self.extraction.initial_budget}"
            )
        for b in self.budgets:
            if (b - self.extraction.initial_budget) % self.extraction.per_cycle != 0:
                raise ConfigError(
                    f"budgets: {b} is not reachable from initial budget "
                    f"{self.extraction.initial_budget} in whole cycles of "
                    f"{self.extraction.per_cycle}"
                )
        if not self.seeds:
            raise ConfigError("seeds: must be non-empty")
        if not self.selectors:
            raise ConfigError("selectors: must be non-empty")
        for i, s in enumerate(self.selectors):
            if s not in ("cega", "random", "age"):
                raise ConfigError(f"selectors[{i}]: unknown selector {s!r}")
        if not 0.0 < self.pool_fraction < 1.0:
            raise ConfigError("partition.pool_fraction: must be in (0, 1)")
        if not 0.0 < self.train_fraction < 1.0:
            raise ConfigError("partition.train_fraction: must be in (0, 1)")
        if self.target_epochs < 1 or self.final_epochs < 1:
            raise ConfigError("training epochs must be >= 1")

    @property
    def max_budget(self) -> int:
        return int(self.budgets[-1])


def _build_extraction(section: dict, max_budget: int) -> ExtractionConfig:
    kwargs = dict(section)
    nested = {
        "weight_schedule": WeightSchedule,
        "perturb": PerturbationConfig,
        "diversity": DiversityConfig,
        "pagerank": PageRankConfig,
        "age": AgeConfig,
    }
    for key, cls in nested.items():
        if key in kwargs and isinstance(kwargs[key], dict):
            kwargs[key] = cls(**kwargs[key])
    # selector/seed/total_budget are sweep dimensions, fixed per run
    kwargs.pop("selector", None)
    kwargs.pop("seed", None)
    kwargs.pop("total_budget", None)
    return ExtractionConfig(total_budget=max_budget, **kwargs)


def parse_spec(doc) -> ExperimentSpec:
    """Build an ExperimentSpec from a JSON document (text or dict).

    Raises ConfigError naming the offending field on validation failure.
    """
    if isinstance(doc, str):
        try:
            doc = json.loads(doc)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config root must be an object")

    try:
        ds = doc["dataset"]
        part = doc.get("partition", {})
        budgets = tuple(int(b) for b in doc["budgets"])
        selectors = tuple(str(s) for s in doc["selectors"])
        seeds = tuple(int(s) for s in doc["seeds"])
        output_dir = str(doc.get("output_dir", "out"))
    except KeyError as exc:
        raise ConfigError(f"config missing required field {exc.args[0]!r}") from exc

    sbm = None
    path = None
    if "sbm" in ds:
        try:
            sbm = SbmConfig(**ds["sbm"])
        except TypeError as exc:
            raise ConfigError(f"dataset.sbm: {exc}") from exc
    elif "path" in ds:
        path = str(ds["path"])
    else:
        raise ConfigError("dataset: needs either an 'sbm' block or a 'path'")

    if not budgets:
        raise ConfigError("budgets: must be non-empty")
    try:
        extraction = _build_extraction(doc.get("extraction", {}), max(budgets))
    except TypeError as exc:
        raise ConfigError(f"extraction: {exc}") from exc

    training = doc.get("training", {})
    return ExperimentSpec(
        dataset_path=path,
        sbm=sbm,
        pool_fraction=float(part.get("pool_fraction", 0.1)),
        train_fraction=float(part.get("train_fraction", 0.6)),
        allow_overlap=bool(part.get("allow_overlap", False)),
        extraction=extraction,
        budgets=budgets,
        selectors=selectors,
        seeds=seeds,
        output_dir=output_dir,
        target_epochs=int(training.get("target_epochs", 1000)),
        final_epochs=int(training.get("final_epochs", 1000)),
    )


def serialize_spec(spec: ExperimentSpec) -> dict:
    """The JSON form of a spec, defaults made explicit."""
    ex = asdict(spec.extraction)
    for drop in ("selector", "seed", "total_budget"):
        ex.pop(drop, None)
    doc = {
        "dataset": (
            {"path": spec.dataset_path} if spec.dataset_path else {"sbm": asdict(spec.sbm)}
        ),
        "partition": {
            "pool_fraction": spec.pool_fraction,
            "train_fraction": spec.train_fraction,
            "allow_overlap": spec.allow_overlap,
        },
        "extraction": ex,
        "training": {
            "target_epochs": spec.target_epochs,
            "final_epochs": spec.final_epochs,
        },
        "budgets": list(spec.budgets),
        "selectors": list(spec.selectors),
        "seeds": list(spec.seeds),
        "output_dir": spec.output_dir,
    }
    return doc


def spec_digest(spec: ExperimentSpec) -> str:
    doc = serialize_spec(spec)
    doc.pop("output_dir")  # the digest fingerprints content, not location
    canon = json.dumps(doc, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


def _atomic_write(path: str, text: str) -> None:
    tmp = path + ".tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _load_world(spec: ExperimentSpec, seed: int):
    """Dataset, partition, and trained target for one replica seed."""
    if spec.sbm is not None:
        dataset = generate_sbm(spec.sbm, seed)
    else:
        dataset = load_dataset(spec.dataset_path)
    n = dataset[0].num_nodes
    part = split_partition(
        n, spec.pool_fraction, spec.train_fraction, seed, allow_overlap=spec.allow_overlap
    )
    target = train_target(
        dataset, part, TrainConfig(epochs=spec.target_epochs, seed=substream_seed(seed, "target"))
    )
    return dataset, part, target


def _pool_view(dataset, part):
    graph, x, _ = dataset
    sub_g, pool_ids = induced_subgraph(graph, part.candidate_pool)
    x_sub = FeatureMatrix(pool_ids.size, x.dim, x.values[pool_ids])
    return sub_g, pool_ids, x_sub


def _run_one(spec: ExperimentSpec, selector: str, seed: int, ablate: str | None = None):
    """Single extraction replica; returns rows for every budget.

    Output: (results_rows, trajectory_rows, selection_lines) where each
    results row is (selector, budget, seed, accuracy, fidelity, macro_f1).
    """
    dataset, part, target = _load_world(spec, seed)
    labels = dataset[2]
    cfg = replace(
        spec.extraction,
        selector=selector,
        seed=seed,
        total_budget=spec.max_budget,
        ablate=ablate,
    )
    records, state = run_extraction(dataset, part, target, cfg)

    sub_g, pool_ids, x_sub = _pool_view(dataset, part)
    final_cfg = TrainConfig(epochs=spec.final_epochs, seed=substream_seed(seed, "final"))
    results = []
    for b in spec.budgets:
        local = np.searchsorted(pool_ids, state.queried[:b])
        model = train_final(
            sub_g, x_sub, local, state.oracle_labels[:b], labels.num_classes, final_cfg
        )
        rep = evaluate(model, target, dataset, part.test)
        results.append((selector, int(b), int(seed), rep.accuracy, rep.fidelity, rep.macro_f1))

    trajectory = []
    consumed = cfg.initial_budget
    for rec in records:
        consumed += rec.selected.size
        if rec.interim_eval is not None:
            r = rec.interim_eval
            trajectory.append(
                (selector, int(seed), int(consumed), r.accuracy, r.fidelity, r.macro_f1)
            )

    sel_lines = ["cycle,selected_ids,w1,w2,w3,selector"]
    for rec in records:
        ids = ";".join(str(int(i)) for i in rec.selected)
        w1, w2, w3 = rec.weights
        sel_lines.append(
            "%d,%s,%.9g,%.9g,%.9g,%s" % (rec.cycle, ids, w1, w2, w3, selector)
        )
    return results, trajectory, sel_lines


def _result_csv(rows, digest: str, header: str) -> str:
    lines = [f"# config_digest={digest}", header]
    for row in rows:
        head, metrics = row[:-3], row[-3:]
        lines.append(
            ",".join(str(h) for h in head)
            + ","
            + ",".join("%.9g" % m for m in metrics)
        )
    return "\n".join(lines) + "\n"


def _read_csv(path: str):
    """Rows of a digest-headed CSV as dicts keyed by the header line."""
    if not os.path.exists(path):
        raise UsageError(f"{path} not found")
    with open(path, encoding="utf-8") as fh:
        lines = [ln for ln in fh.read().splitlines() if ln.strip()]
    body = [ln for ln in lines if not ln.startswith("#")]
    header = body[0].split(",")
    return [dict(zip(header, ln.split(","))) for ln in body[1:]]


def _mean_std(values):
    v = np.asarray(values, dtype=np.float64)
    mean = float(v.mean())
    std = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return mean, std


def _summary_table(rows):
    """Mean +/- std of each metric per (selector, budget) cell."""
    cells = {}
    for r in rows:
        key = (r["selector"], int(r["budget"]))
        cells.setdefault(key, []).append(
            (float(r["accuracy"]), float(r["fidelity"]), float(r["macro_f1"]))
        )
    lines = []
    for (sel, budget) in sorted(cells, key=lambda k: (k[0], k[1])):
        vals = np.array(cells[(sel, budget)])
        parts = []
        for j, name in enumerate(("accuracy", "fidelity", "macro_f1")):
            m, s = _mean_std(vals[:, j])
            parts.append(f"{name} {m:.4f} +/- {s:.4f}")
        lines.append(f"{sel:>8s}  B={budget:<5d} " + "  ".join(parts))
    return lines


def run_experiment(spec: ExperimentSpec, jobs: int = 1) -> int:
    """Execute the full selector x budget x seed grid; returns exit code.

    Failed replicas are recorded in a failure manifest and the remaining
    replicas still run (exit code 2 if anything failed).
    """
    os.makedirs(spec.output_dir, exist_ok=True)
    digest = spec_digest(spec)
    _atomic_write(
        os.path.join(spec.output_dir, CONFIG_DUMP),
        json.dumps(serialize_spec(spec), indent=2, sort_keys=True) + "\n",
    )

    tasks = [(sel, seed) for sel in spec.selectors for seed in spec.seeds]
    outcomes = {}
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {t: pool.submit(_run_one, spec, t[0], t[1]) for t in tasks}
            for t, fut in futs.items():
                try:
                    outcomes[t] = fut.result()
                except Exception as exc:
                    failures.append((t, f"{type(exc).__name__}: {exc}"))
    else:
        for t in tasks:
            try:
                outcomes[t] = _run_one(spec, t[0], t[1])
            except Exception as exc:
                failures.append((t, f"{type(exc).__name__}: {exc}"))

    results, trajectory = [], []
    for sel in spec.selectors:
        for seed in spec.seeds:
            if (sel, seed) not in outcomes:
                continue
            res, traj, sel_lines = outcomes[(sel, seed)]
            results.extend(res)
            trajectory.extend(traj)
            _atomic_write(
                os.path.join(spec.output_dir, f"selections_{sel}_seed{seed}.csv"),
                "\n".join(sel_lines) + "\n",
            )
    # fixed row order: selector (spec order), then budget, then seed
    order = {s: i for i, s in enumerate(spec.selectors)}
    results.sort(key=lambda r: (order[r[0]], r[1], r[2]))
    trajectory.sort(key=lambda r: (order[r[0]], r[1], r[2]))

    _atomic_write(
        os.path.join(spec.output_dir, RESULTS_FILE),
        _result_csv(results, digest, "selector,budget,seed,accuracy,fidelity,macro_f1"),
    )
    _atomic_write(
        os.path.join(spec.output_dir, TRAJECTORY_FILE),
        _result_csv(
            trajectory, digest, "selector,seed,budget_checkpoint,accuracy,fidelity,macro_f1"
        ),
    )

    for line in _summary_table(_read_csv(os.path.join(spec.output_dir, RESULTS_FILE))):
        print(line)
    if "age" in spec.selectors:
        print("note: the AGE baseline here uses a simplified density criterion")

    if failures:
        manifest = [f"{sel},{seed}: {msg}" for (sel, seed), msg in failures]
        _atomic_write(
            os.path.join(spec.output_dir, FAILURES_FILE), "\n".join(manifest) + "\n"
        )
        print(f"{len(failures)} run(s) failed; see {FAILURES_FILE}")
        return 2
    return 0


def _reference_report(spec: ExperimentSpec, seed: int):
    """Surrogate trained on the whole oracle-labeled pool (no budget)."""
    dataset, part, target = _load_world(spec, seed)
    graph, x, labels = dataset
    sub_g, pool_ids, x_sub = _pool_view(dataset, part)
    oracle = QueryOracle(target, graph, x, budget=None)
    lab = oracle.query(pool_ids)
    model = train_final(
        sub_g,
        x_sub,
        np.arange(pool_ids.size),
        lab,
        labels.num_classes,
        TrainConfig(epochs=spec.final_epochs, seed=substream_seed(seed, "final")),
    )
    return evaluate(model, target, dataset, part.test)


def sweep_gap(spec: ExperimentSpec, with_reference: bool = False) -> int:
    """Gaps between the full-pool reference and the max-budget models.

    Requires results from run_experiment. The per-seed reference models
    are loaded from reference.csv or computed when ``with_reference``.
    """
    digest = spec_digest(spec)
    results = _read_csv(os.path.join(spec.output_dir, RESULTS_FILE))

    ref_path = os.path.join(spec.output_dir, REFERENCE_FILE)
    if not os.path.exists(ref_path):
        if not with_reference:
            raise UsageError(
                f"{ref_path} not found: run sweep-gap with --with-reference "
                "to train the reference models first"
            )
        rows = []
        for seed in spec.seeds:
            rep = _reference_report(spec, seed)
            rows.append((int(seed), rep.accuracy, rep.fidelity, rep.macro_f1))
        lines = [f"# config_digest={digest}", "# reference=true", "seed,accuracy,fidelity,macro_f1"]
        for r in rows:
            lines.append("%d,%.9g,%.9g,%.9g" % r)
        _atomic_write(ref_path, "\n".join(lines) + "\n")

    ref = {int(r["seed"]): r for r in _read_csv(ref_path)}
    missing = [s for s in spec.seeds if s not in ref]
    if missing:
        raise UsageError(f"reference.csv lacks seeds {missing}; rerun with --with-reference")

    b_max = spec.max_budget
    gap_rows = []
    for r in results:
        if int(r["budget"]) != b_max:
            continue
        seed = int(r["seed"])
        rr = ref[seed]
        gap_rows.append(
            (
                r["selector"],
                b_max,
                seed,
                float(rr["accuracy"]) - float(r["accuracy"]),
                float(rr["fidelity"]) - float(r["fidelity"]),
                float(rr["macro_f1"]) - float(r["macro_f1"]),
            )
        )
    if not gap_rows:
        raise UsageError(f"results.csv has no rows at the max budget {b_max}")
    _atomic_write(
        os.path.join(spec.output_dir, GAPS_FILE),
        _result_csv(gap_rows, digest, "selector,budget,seed,acc_gap,fid_gap,f1_gap"),
    )
    by_sel = {}
    for row in gap_rows:
        by_sel.setdefault(row[0], []).append(row[4])
    for sel in sorted(by_sel):
        m, s = _mean_std(by_sel[sel])
        print(f"{sel:>8s}  fidelity gap {m:+.4f} +/- {s:.4f}")
    return 0


def run_ablate(spec: ExperimentSpec, jobs: int = 1) -> int:
    """Full rank-aggregation run plus the three one-criterion-off runs."""
    os.makedirs(spec.output_dir, exist_ok=True)
    digest = spec_digest(spec)

    tasks = [(name, ablate, seed) for name, ablate in ABLATION_VARIANTS for seed in spec.seeds]
    rows = []
    failures = []
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = {t: pool.submit(_ablate_worker, spec, *t) for t in tasks}
            for t, fut in futs.items():
                try:
                    rows.append(fut.result())
                except Exception as exc:
                    failures.append((t, f"{type(exc).__name__}: {exc}"))
    else:
        for t in tasks:
            try:
                rows.append(_ablate_worker(spec, *t))
            except Exception as exc:
                failures.append((t, f"{type(exc).__name__}: {exc}"))

    name_order = {n: i for i, (n, _) in enumerate(ABLATION_VARIANTS)}
    rows.sort(key=lambda r: (name_order[r[0]], r[1]))
    _atomic_write(
        os.path.join(spec.output_dir, ABLATION_FILE),
        _result_csv(rows, digest, "variant,seed,accuracy,fidelity,macro_f1"),
    )

    by_variant = {}
    for name, _seed, acc, fid, f1 in rows:
        by_variant.setdefault(name, []).append((acc, fid, f1))
    for name, _ in ABLATION_VARIANTS:
        if name not in by_variant:
            continue
        vals = np.array(by_variant[name])
        parts = []
        for j, metric in enumerate(("accuracy", "fidelity", "macro_f1")):
            m, s = _mean_std(vals[:, j])
            parts.append(f"{metric} {m:.4f} +/- {s:.4f}")
        print(f"{name:>15s}  " + "  ".join(parts))

    if failures:
        manifest = [f"{t}: {msg}" for t, msg in failures]
        _atomic_write(
            os.path.join(spec.output_dir, FAILURES_FILE), "\n".join(manifest) + "\n"
        )
        return 2
    return 0


def _ablate_worker(spec, name, ablate, seed):
    res, _, _ = _run_one(spec, "cega", seed, ablate=ablate)
    rep = [r for r in res if r[1] == spec.max_budget][0]
    return (name, int(seed), rep[3], rep[4], rep[5])


def report(output_dir: str) -> int:
    """Re-print summary tables from the CSVs in ``output_dir``."""
    results = _read_csv(os.path.join(output_dir, RESULTS_FILE))
    for line in _summary_table(results):
        print(line)
    if any(r["selector"] == "age" for r in results):
        print("note: the AGE baseline here uses a simplified density criterion")
    abl_path = os.path.join(output_dir, ABLATION_FILE)
    if os.path.exists(abl_path):
        by_variant = {}
        for r in _read_csv(abl_path):
            by_variant.setdefault(r["variant"], []).append(
                (float(r["accuracy"]), float(r["fidelity"]), float(r["macro_f1"]))
            )
        name_order = {n: i for i, (n, _) in enumerate(ABLATION_VARIANTS)}
        for name in sorted(by_variant, key=lambda n: name_order.get(n, 99)):
            vals = np.array(by_variant[name])
            parts = []
            for j, metric in enumerate(("accuracy", "fidelity", "macro_f1")):
                m, s = _mean_std(vals[:, j])
                parts.append(f"{metric} {m:.4f} +/- {s:.4f}")
            print(f"{name:>15s}  " + "  ".join(parts))
    return 0
