"""Multi-instance experiment runner and aggregate tables.

A run covers one or more problems; for each problem ``instance_count``
instances are generated (NK instance ``i`` uses seed ``master_seed + i``) and
analysed under every configured sampling condition. Every other random stream
is derived from the master seed, the problem and the instance index, so
rerunning a config reproduces the bundle byte for byte.

Bundle layout::

    config.json
    failures.json
    metrics.csv                     long format: problem, instance, condition, metric, value
    tables/*.csv                    aggregate tables
    instances/<problem>/<index>/    per-instance artefacts
    plot_data/*.csv                 written by :func:`emit_plot_data`
"""

from __future__ import annotations

import csv
import json
import math
import traceback
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from .basins import build_basins, fitness_basin_correlation
from .errors import ConfigurationError, InputError, MissingComponentError
from .networks import (
    EXCLUSION_MODES,
    basin_overlap_network,
    exclude_nonwalk_edges,
    network_stats,
    step_size_barriers,
    temperature_stats,
)
from .plops import detect_plops, detection_metrics, estimator_metrics, plef_local_optima
from .problems import HiffInstance, Landscape, generate_nk, save_instance
from .sampling import ORIGINS, WlParams, awl_sample, build_bins, enumerate_space, rand_sample, save_sample
from .stats import PairedSeries, confidence_interval_95, mad_rmsd, mean, std
from .walks import DEFAULT_BUDGET, STRATEGIES, save_walks, walk_all

ESTIMATORS = ("dyna", "rand", "combi")
_STAGES = {"awl": 1, "rand": 2, "walks": 3, "paths": 4, "estimator": 5}
_CONDITION_CODE = {c: i for i, c in enumerate(ORIGINS)}


@dataclass(frozen=True)
class ProblemSpec:
    """One landscape family: ``nk`` with ``n``/``k`` or ``hiff`` with ``n``/``variant``."""

    kind: str = "nk"
    n: int = 16
    k: int = 4
    variant: str = "classic"
    estimators: tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind not in ("nk", "hiff"):
            raise ConfigurationError(f"unknown problem kind {self.kind!r}")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad:
            raise ConfigurationError(f"unknown estimators {bad}; expected a subset of {ESTIMATORS}")

    @property
    def label(self) -> str:
        return f"nk-{self.n}-{self.k}" if self.kind == "nk" else f"hiff-{self.variant}-{self.n}"

    @property
    def key(self) -> tuple[int, ...]:
        if self.kind == "nk":
            return (0, self.n, self.k)
        return (1, self.n, sum(ord(c) for c in self.variant))

    def instance(self, seed: int) -> Landscape:
        if self.kind == "nk":
            return generate_nk(self.n, self.k, seed)
        return HiffInstance(self.n, self.variant)


@dataclass
class ExperimentConfig:
    problems: tuple[ProblemSpec, ...] = (
        ProblemSpec("nk", 16, 4),
        ProblemSpec("nk", 16, 8, estimators=ESTIMATORS),
        ProblemSpec("nk", 16, 12),
    )
    instance_count: int = 30
    conditions: tuple[str, ...] = ORIGINS
    flatness: float = 0.85
    epsilon: float = 1e-8
    flat_target: int = 5
    bin_width: float = 0.1
    max_size: int | None = None
    min_size: int | None = None
    strategy: str = "exhaustive"
    budget: int = DEFAULT_BUDGET
    repeats: int = 1
    exclusion: str = "from-walk"
    path_sample_cap: int = 1000
    master_seed: int = 0
    out_dir: str = "results"
    workers: int = 1
    save_artifacts: bool = True

    def __post_init__(self):
        self.problems = tuple(p if isinstance(p, ProblemSpec) else ProblemSpec(**{**p, "estimators": tuple(p.get("estimators", ()))}) for p in self.problems)
        self.conditions = tuple(self.conditions)
        self.validate()

    def validate(self) -> None:
        if not self.problems:
            raise ConfigurationError("at least one problem is required")
        if self.instance_count < 1:
            raise ConfigurationError("instance_count must be >= 1")
        unknown = [c for c in self.conditions if c not in ORIGINS]
        if unknown or not self.conditions:
            raise ConfigurationError(f"conditions must be a non-empty subset of {ORIGINS}")
        if "RAND" in self.conditions and "AWL" not in self.conditions:
            raise ConfigurationError("RAND sample sizes are matched to AWL samples, so RAND requires AWL")
        if self.strategy not in STRATEGIES:
            raise ConfigurationError(f"strategy must be one of {STRATEGIES}")
        if self.exclusion not in EXCLUSION_MODES:
            raise ConfigurationError(f"exclusion must be one of {EXCLUSION_MODES}")
        if self.budget < 1 or self.repeats < 1 or self.workers < 1:
            raise ConfigurationError("budget, repeats and workers must be >= 1")
        if any(p.estimators for p in self.problems) and "ENUM" not in self.conditions:
            raise ConfigurationError("estimator comparisons run on ENUM samples, so they require ENUM")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["problems"] = [dict(asdict(p), estimators=list(p.estimators)) for p in self.problems]
        d["conditions"] = list(self.conditions)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        extra = set(d) - known
        if extra:
            raise ConfigurationError(f"unknown config keys: {sorted(extra)}")
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "ExperimentConfig":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except (OSError, json.JSONDecodeError) as exc:
            raise InputError(f"cannot read config {path}: {exc}") from exc

    def wl_params(self, seed: int) -> WlParams:
        return WlParams(self.flatness, self.epsilon, self.flat_target, self.max_size, self.min_size, seed)


def derive_seed(master: int, problem: ProblemSpec, index: int, stage: str, *extra: int) -> int:
    """Integer seed for one random stream, a pure function of its arguments."""
    ss = np.random.SeedSequence(entropy=master, spawn_key=(*problem.key, index, _STAGES[stage], *extra))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> np.uint64(1))


# -- one instance ---------------------------------------------------------------

@dataclass
class ConditionResult:
    condition: str
    metrics: dict[str, Any]
    degree_distributions: dict[str, list]
    trace: list[dict] = field(default_factory=list)


def _flatten_stats(prefix: str, st) -> dict:
    if st is None:
        return {f"{prefix}_V": None}
    d = st.to_dict()
    d.pop("reversed_cumulative_degree_distribution")
    return {f"{prefix}_{k}": v for k, v in d.items()}


def run_condition(inst: Landscape, sample, config: ExperimentConfig, problem: ProblemSpec, index: int,
                  lo_total: int, out: Path | None = None) -> tuple[ConditionResult, Any]:
    """Walk, detect, and characterize one sample; returns the result and the PLOP report."""
    cond = sample.origin
    c = _CONDITION_CODE[cond]
    walks = walk_all(sample, rng=derive_seed(config.master_seed, problem, index, "walks", c),
                     repeats=config.repeats, strategy=config.strategy, budget=config.budget)
    report = detect_plops(sample, walks, inst)
    det = detection_metrics(report, inst, lo_total)
    basins = build_basins(sample, walks)
    corr = fitness_basin_correlation(basins, report)
    temp = step_size_barriers(report, walks)
    tstats = temperature_stats(temp)
    overlap = basin_overlap_network(basins, report)
    excluded = exclude_nonwalk_edges(overlap, walks, sample, config.exclusion)
    path_rng = lambda tag: np.random.default_rng(derive_seed(config.master_seed, problem, index, "paths", c, tag))
    full_stats = network_stats(overlap, config.path_sample_cap, path_rng(0))
    excl_stats = network_stats(excluded, config.path_sample_cap, path_rng(1))
    terminus_fit = sample.fitness[sample.position[walks.termini]]
    reach = len(temp.reachable_from(int(temp.nodes[np.argmax(temp.fitness)]))) / temp.V if temp.V else None

    metrics: dict[str, Any] = {
        "sample_size": len(sample),
        "coverage": sample.coverage,
        "sample_min_fitness": float(sample.fitness.min()),
        "sample_max_fitness": float(sample.fitness.max()),
        "walk_steps": walks.total_steps,
        "termini_at_sample_max": float(np.mean(terminus_fit == sample.fitness.max())),
        **det,
        "spearman_rho": corr.rho if corr else None,
        "spearman_p": corr.p_value if corr else None,
        "spearman_significant": (1 if corr.significant else 0) if corr else None,
        **tstats,
        "temperature_V": temp.V,
        "temperature_E": temp.E,
        "temperature_fittest_reach": reach,
        **_flatten_stats("overlap", full_stats),
        **_flatten_stats("excluded", excl_stats),
    }
    trace: list[dict] = []
    if cond == "AWL":
        wl = sample.meta["wang_landau"]
        metrics["awl_evaluations"] = wl["evaluations"]
        metrics["awl_iterations"] = wl["iterations"]
        metrics["awl_flat_count"] = wl["flat_count"]
        trace = wl["trace"]
    dists = {
        "overlap": [list(p) for p in full_stats.reversed_cumulative_degree_distribution] if full_stats else [],
        "excluded": [list(p) for p in excl_stats.reversed_cumulative_degree_distribution] if excl_stats else [],
    }
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        tag = cond.lower()
        save_sample(sample, out / f"sample_{tag}.json")
        save_walks(walks, out / f"walks_{tag}.npz")
        report.to_csv(out / f"los_{tag}.csv")
        basins.to_csv(out / f"basins_{tag}.csv", report)
        temp.to_csv(out / f"temperature_{tag}.csv")
        overlap.to_csv(out / f"overlap_{tag}.csv")
        excluded.to_csv(out / f"overlap_excluded_{tag}.csv")
        for name, st in (("overlap", full_stats), ("overlap_excluded", excl_stats)):
            if st is not None:
                st.save(out / f"{name}_{tag}_stats.json")
    return ConditionResult(cond, metrics, dists, trace), report


def run_estimators(inst: Landscape, sample, act_plops: np.ndarray, config: ExperimentConfig,
                   problem: ProblemSpec, index: int) -> dict[str, dict]:
    """Compare each sampled estimator's PLOP set with the exact-search PLOP set."""
    out = {}
    for j, est in enumerate(ESTIMATORS):
        if est not in problem.estimators:
            continue
        seed = derive_seed(config.master_seed, problem, index, "estimator", j)
        walks = walk_all(sample, rng=seed, repeats=config.repeats, strategy=est, budget=config.budget)
        report = detect_plops(sample, walks)
        out[est] = estimator_metrics(report.plop_codes, act_plops)
    return out


def run_instance(config: ExperimentConfig, problem: ProblemSpec, index: int, write: bool = True) -> dict:
    """Every condition for one instance; returns a JSON-ready record."""
    seed = config.master_seed + index
    inst = problem.instance(seed)
    out = Path(config.out_dir) / "instances" / problem.label / f"{index:03d}" if (write and config.save_artifacts) else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
        save_instance(inst, out / "instance.json")
    lo_total = int(plef_local_optima(inst).size)
    samples = {}
    if "ENUM" in config.conditions:
        samples["ENUM"] = enumerate_space(inst)
    if "AWL" in config.conditions:
        bins = build_bins(inst, config.bin_width)
        samples["AWL"] = awl_sample(inst, bins, config.wl_params(derive_seed(config.master_seed, problem, index, "awl")))
    if "RAND" in config.conditions:
        samples["RAND"] = rand_sample(inst, len(samples["AWL"]), derive_seed(config.master_seed, problem, index, "rand"))

    record: dict[str, Any] = {"problem": problem.label, "instance": index, "instance_seed": seed, "conditions": {}}
    for cond in ORIGINS:
        if cond not in samples:
            continue
        res, report = run_condition(inst, samples[cond], config, problem, index, lo_total, out)
        record["conditions"][cond] = {"metrics": res.metrics, "degree_distributions": res.degree_distributions, "trace": res.trace}
        if cond == "ENUM" and problem.estimators:
            record["estimators"] = run_estimators(inst, samples[cond], report.plop_codes, config, problem, index)
    if out is not None:
        (out / "record.json").write_text(json.dumps(record, sort_keys=True, indent=1) + "\n")
    return record


def _task(args) -> tuple[tuple[int, int], dict | None, str | None]:
    config, p_idx, index = args
    problem = config.problems[p_idx]
    try:
        return (p_idx, index), run_instance(config, problem, index), None
    except Exception as exc:  # one bad instance must not sink the whole run
        return (p_idx, index), None, f"{type(exc).__name__}: {exc}\n{traceback.format_exc(limit=3)}"


# -- aggregation ----------------------------------------------------------------

def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(v)
    return str(v)


def _write_rows(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])


def _series(records: list[dict], cond: str, metric: str) -> list:
    return [r["conditions"].get(cond, {}).get("metrics", {}).get(metric) for r in records]


def _summary(values: list) -> list:
    vals = [v for v in values if v is not None]
    ci = confidence_interval_95(vals)
    return [len(vals), mean(vals), std(vals), ci[0] if ci else None, ci[1] if ci else None]


SUMMARY_HEADER = ["count", "mean", "sd", "ci95_lo", "ci95_hi"]
FIGURE_METRICS = {
    "fig4_awl": ("awl_evaluations", "coverage"),
    "fig5_capture": ("capture_rate",),
    "fig6_detection": ("detection_rate",),
    "fig7_plops": ("plop_count", "plef_lo_count_total"),
    "fig9_networks": ("overlap_V", "overlap_E", "overlap_mean_degree", "overlap_link_density",
                      "overlap_clustering_coefficient", "overlap_avg_path_length", "overlap_er_path_length"),
    "fig11_degree_cv": ("overlap_degree_cv", "excluded_degree_cv"),
}


def aggregate(records_by_problem: dict[str, list[dict]], conditions: tuple[str, ...]) -> dict[str, tuple[list[str], list[list]]]:
    """Aggregate tables keyed by file stem, each ``(header, rows)``."""
    tables: dict[str, tuple[list[str], list[list]]] = {}

    rows = []
    for label, recs in records_by_problem.items():
        for cond in conditions:
            plops = mean(_series(recs, cond, "plop_count"))
            lo = mean(_series(recs, cond, "plef_lo_count_total"))
            rows.append([label, cond, len(recs), plops, lo, plops / lo if plops is not None and lo else None])
    tables["table1_overestimation"] = (["problem", "condition", "instances", "mean_plops", "mean_plef_lo", "overestimation_factor"], rows)

    rows = []
    for label, recs in records_by_problem.items():
        for cond in conditions:
            rho = _series(recs, cond, "spearman_rho")
            sig = [s for s in _series(recs, cond, "spearman_significant") if s is not None]
            rows.append([label, cond, sum(v is not None for v in rho), mean(rho), std(rho), int(sum(sig))])
    tables["table2_correlation"] = (["problem", "condition", "count", "mean_rho", "sd_rho", "significant"], rows)

    for stem, metric, gate in (
        ("table3_correlation_differences", "spearman_rho", "spearman_significant"),
        ("table4_avg_mode_sb_differences", "all_nodes_avg_mode_sb", None),
        ("table5_fittest_mode_sb_differences", "fittest_node_mode_sb", None),
    ):
        rows = []
        for label, recs in records_by_problem.items():
            if "ENUM" not in conditions:
                continue
            base = _series(recs, "ENUM", metric)
            if gate:
                base = [b if g == 1 else None for b, g in zip(base, _series(recs, "ENUM", gate))]
            for cond in conditions:
                if cond == "ENUM":
                    continue
                other = _series(recs, cond, metric)
                if gate:
                    other = [o if g == 1 else None for o, g in zip(other, _series(recs, cond, gate))]
                pairs = PairedSeries.dropping_missing(base, other)
                d = mad_rmsd(pairs) if len(pairs) else {"mad": None, "rmsd": None}
                rows.append([label, cond, len(pairs), d["mad"], d["rmsd"]])
        tables[stem] = (["problem", "condition", "pairs", "mad", "rmsd"], rows)

    for stem, metrics in FIGURE_METRICS.items():
        rows = []
        for label, recs in records_by_problem.items():
            for cond in conditions:
                if stem == "fig4_awl" and cond != "AWL":
                    continue
                for metric in metrics:
                    rows.append([label, cond, metric, *_summary(_series(recs, cond, metric))])
        tables[stem] = (["problem", "condition", "metric", *SUMMARY_HEADER], rows)

    rows = []
    for label, recs in records_by_problem.items():
        for est in ESTIMATORS:
            got = [r.get("estimators", {}).get(est) for r in recs]
            if not any(got):
                continue
            for metric in ("fp", "fn", "overlap"):
                rows.append([label, est, metric, *_summary([g.get(metric) if g else None for g in got])])
    tables["fig12_estimators"] = (["problem", "estimator", "metric", *SUMMARY_HEADER], rows)
    return tables


def _metric_rows(records: list[dict]) -> list[list]:
    rows = []
    for r in records:
        for cond, c in r["conditions"].items():
            for metric in sorted(c["metrics"]):
                rows.append([r["problem"], r["instance"], cond, metric, c["metrics"][metric]])
        for est, m in sorted(r.get("estimators", {}).items()):
            for metric in sorted(m):
                rows.append([r["problem"], r["instance"], f"estimator:{est}", metric, m[metric]])
    return rows


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    records: list[dict]
    failures: list[dict]
    tables: dict[str, tuple[list[str], list[list]]]

    @property
    def partial(self) -> bool:
        return bool(self.failures)


def run_experiment(config: ExperimentConfig) -> ExperimentResult:
    """Run every (problem, instance) pair, then write the aggregate bundle."""
    out = Path(config.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    tasks = [(config, p, i) for p in range(len(config.problems)) for i in range(config.instance_count)]
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            results = list(pool.map(_task, tasks))
    else:
        results = [_task(t) for t in tasks]
    results.sort(key=lambda r: r[0])

    records, failures = [], []
    by_problem: dict[str, list[dict]] = {p.label: [] for p in config.problems}
    for (p_idx, index), rec, err in results:
        if rec is None:
            failures.append({"problem": config.problems[p_idx].label, "instance": index, "error": err})
        else:
            records.append(rec)
            by_problem[rec["problem"]].append(rec)

    (out / "config.json").write_text(json.dumps(config.to_dict(), sort_keys=True, indent=1) + "\n")
    (out / "failures.json").write_text(json.dumps(failures, sort_keys=True, indent=1) + "\n")
    completed = {label: len(recs) for label, recs in by_problem.items()}
    (out / "completed.json").write_text(json.dumps(completed, sort_keys=True, indent=1) + "\n")
    (out / "records.json").write_text(json.dumps(records, sort_keys=True) + "\n")
    _write_rows(out / "metrics.csv", ["problem", "instance", "condition", "metric", "value"], _metric_rows(records))
    tables = aggregate(by_problem, config.conditions)
    for stem, (header, rows) in tables.items():
        _write_rows(out / "tables" / f"{stem}.csv", header, rows)
    return ExperimentResult(config, records, failures, tables)


def emit_plot_data(bundle: str | Path) -> list[Path]:
    """Long-format plotting CSVs from a finished bundle.

    Raises :class:`MissingComponentError` naming the first missing piece.
    """
    bundle = Path(bundle)
    for part in ("config.json", "records.json", "metrics.csv"):
        if not (bundle / part).exists():
            raise MissingComponentError(part, str(bundle))
    records = json.loads((bundle / "records.json").read_text())
    dest = bundle / "plot_data"
    dest.mkdir(exist_ok=True)
    written = []

    metric = dest / "metrics_long.csv"
    _write_rows(metric, ["problem", "instance", "condition", "metric", "value"], _metric_rows(records))
    written.append(metric)

    rows = []
    for r in records:
        for cond, c in r["conditions"].items():
            for net, dist in c.get("degree_distributions", {}).items():
                for k, p in dist:
                    rows.append([r["problem"], r["instance"], cond, net, k, p])
    path = dest / "degree_distributions.csv"
    _write_rows(path, ["problem", "instance", "condition", "network", "k", "P_geq_k"], rows)
    written.append(path)

    rows = []
    for r in records:
        for cond, c in r["conditions"].items():
            for t in c.get("trace", []):
                rows.append([r["problem"], r["instance"], cond, t["iteration"], t["sample_size"], t["flat_count"], t["ln_f"], t["f"], t["event"]])
    path = dest / "awl_traces.csv"
    _write_rows(path, ["problem", "instance", "condition", "iteration", "sample_size", "flat_count", "ln_f", "f", "event"], rows)
    written.append(path)
    return written
