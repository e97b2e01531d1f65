"""``landscape-lab`` command line.

Each subcommand reads and writes the same files the experiment runner
persists, so any stage can be rerun on its own. Exit codes: 0 success,
1 input or configuration error, 2 capability error, 3 partial failure.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .basins import BASIN_MODES, build_basins, fitness_basin_correlation
from .errors import InputError, LandscapeError
from .experiment import ESTIMATORS, ExperimentConfig, aggregate, emit_plot_data, run_experiment
from .networks import EXCLUSION_MODES, basin_overlap_network, exclude_nonwalk_edges, network_stats, step_size_barriers, temperature_stats
from .plops import detect_plops, detection_metrics, load_los_report
from .problems import HIFF_VARIANTS, HiffInstance, generate_nk, hiff_variant, load_instance, save_instance
from .sampling import WlParams, awl_sample, build_bins, enumerate_space, load_sample, rand_sample, save_sample
from .walks import DEFAULT_BUDGET, STRATEGIES, load_walks, save_walks, walk_all

EXIT_PARTIAL = 3


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True, indent=1))


def cmd_generate(a) -> int:
    if a.kind == "hiff":
        hiff_variant(a.variant)  # fail now rather than when the file is first evaluated
    inst = generate_nk(a.n, a.k, a.seed) if a.kind == "nk" else HiffInstance(a.n, a.variant)
    save_instance(inst, a.out)
    _emit({"instance": inst.ref, "out": a.out})
    return 0


def cmd_sample(a) -> int:
    inst = load_instance(a.instance)
    if a.method == "enum":
        s = enumerate_space(inst)
    elif a.method == "awl":
        params = WlParams(a.flatness, a.epsilon, a.flat_target, a.max_size, a.min_size, a.seed)
        s = awl_sample(inst, build_bins(inst, a.bin_width), params)
    else:
        if (a.size is None) == (a.match is None):
            raise InputError("rand sampling needs exactly one of --size or --match")
        size = a.size if a.size is not None else len(load_sample(a.match))
        s = rand_sample(inst, size, a.seed)
    save_sample(s, a.out)
    _emit({"origin": s.origin, "size": len(s), "coverage": s.coverage, "out": a.out})
    return 0


def cmd_walk(a) -> int:
    s = load_sample(a.sample)
    ws = walk_all(s, rng=a.seed, repeats=a.repeats, strategy=a.strategy, budget=a.budget)
    save_walks(ws, a.out)
    _emit({"walks": len(ws), "steps": ws.total_steps, "strategy": ws.strategy, "out": a.out})
    return 0


def cmd_plops(a) -> int:
    s = load_sample(a.sample)
    inst = load_instance(a.instance) if a.instance else None
    report = detect_plops(s, load_walks(a.walks), inst)
    report.to_csv(a.out)
    summary = {"plop_count": report.plop_count, "points": len(s), "out": a.out}
    if inst is not None:
        summary.update(detection_metrics(report, inst))
    _emit(summary)
    return 0


def cmd_basins(a) -> int:
    report = load_los_report(a.report)
    basins = build_basins(report.sample, load_walks(a.walks), a.mode)
    basins.to_csv(a.out, report)
    corr = fitness_basin_correlation(basins, report)
    _emit({"spearman_rho": corr.rho if corr else None, "p_value": corr.p_value if corr else None,
           "basins": int(basins.holders.size), "out": a.out})
    return 0


def cmd_network(a) -> int:
    report = load_los_report(a.report)
    walks = load_walks(a.walks)
    if a.type == "temperature":
        net = step_size_barriers(report, walks)
        extra = temperature_stats(net)
    else:
        net = basin_overlap_network(build_basins(report.sample, walks, a.basin_mode), report)
        if a.exclude_nonwalk:
            net = exclude_nonwalk_edges(net, walks, report.sample, a.exclude_nonwalk)
        extra = {}
    net.to_csv(a.out)
    st = network_stats(net, a.path_cap, np.random.default_rng(a.seed))
    if a.stats:
        if st is None:
            raise InputError("network has fewer than two nodes; no statistics to write")
        st.save(a.stats)
    summary = {"V": net.V, "E": net.E, "out": a.out, **extra}
    if st is not None:
        summary.update({k: v for k, v in st.to_dict().items() if k != "reversed_cumulative_degree_distribution"})
    _emit(summary)
    return 0


def cmd_stats(a) -> int:
    bundle = Path(a.bundle)
    records_path = bundle / "records.json"
    if not records_path.exists():
        raise InputError(f"{bundle} has no records.json; is it an experiment bundle?")
    records = json.loads(records_path.read_text())
    config = ExperimentConfig.load(bundle / "config.json")
    by_problem: dict[str, list] = {p.label: [] for p in config.problems}
    for r in records:
        by_problem.setdefault(r["problem"], []).append(r)
    tables = aggregate(by_problem, config.conditions)
    if a.plot_data:
        emit_plot_data(bundle)
    _emit({stem: {"header": h, "rows": rows} for stem, (h, rows) in tables.items() if not a.table or stem.startswith(a.table)})
    return 0


def _experiment_config(a) -> ExperimentConfig:
    if a.config:
        cfg = ExperimentConfig.load(a.config).to_dict()
    else:
        problems = [{"kind": "nk", "n": a.n, "k": k, "estimators": list(ESTIMATORS) if k in a.estimator_k else []} for k in a.k]
        if a.hiff:
            problems.append({"kind": "hiff", "n": a.n, "variant": "classic"})
        cfg = {"problems": problems, "instance_count": a.instances, "conditions": a.conditions}
    for key in ("seed", "out_dir", "workers"):
        v = getattr(a, key)
        if v is not None:
            cfg["master_seed" if key == "seed" else key] = v
    return ExperimentConfig.from_dict(cfg)


def cmd_experiment(a) -> int:
    config = _experiment_config(a)
    result = run_experiment(config)
    emit_plot_data(config.out_dir)
    _emit({"out_dir": config.out_dir, "completed": len(result.records), "failed": len(result.failures)})
    for f in result.failures:
        print(f"instance {f['problem']}#{f['instance']} failed: {f['error'].splitlines()[0]}", file=sys.stderr)
    return EXIT_PARTIAL if result.partial else 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="landscape-lab", description=__doc__.splitlines()[0])
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True)

    g = sub.add_parser("generate", help="create a problem instance file")
    g.add_argument("kind", choices=("nk", "hiff"))
    g.add_argument("--n", type=int, default=16)
    g.add_argument("--k", type=int, default=4)
    g.add_argument("--variant", choices=HIFF_VARIANTS, default="classic")
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--out", required=True)
    g.set_defaults(func=cmd_generate)

    s = sub.add_parser("sample", help="draw a point sample from an instance")
    s.add_argument("method", choices=("awl", "rand", "enum"))
    s.add_argument("--instance", required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.add_argument("--flatness", type=float, default=0.85)
    s.add_argument("--flat-target", type=int, default=5)
    s.add_argument("--bin-width", type=float, default=0.1)
    s.add_argument("--epsilon", type=float, default=1e-8)
    s.add_argument("--max-size", type=int)
    s.add_argument("--min-size", type=int)
    s.add_argument("--size", type=int, help="rand: sample size")
    s.add_argument("--match", help="rand: take the size of this sample file")
    s.set_defaults(func=cmd_sample)

    w = sub.add_parser("walk", help="slow adaptive walks from every sample point")
    w.add_argument("--sample", required=True)
    w.add_argument("--strategy", choices=STRATEGIES, default="exhaustive")
    w.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    w.add_argument("--repeats", type=int, default=1)
    w.add_argument("--seed", type=int, default=0)
    w.add_argument("--out", required=True, help=".npz for compact storage, anything else for JSON lines")
    w.set_defaults(func=cmd_walk)

    pl = sub.add_parser("plops", help="local optima scores from walks")
    pl.add_argument("--sample", required=True)
    pl.add_argument("--walks", required=True)
    pl.add_argument("--instance", help="adds plef values and detection metrics")
    pl.add_argument("--out", required=True)
    pl.set_defaults(func=cmd_plops)

    b = sub.add_parser("basins", help="basins of attraction and the fitness/basin-size correlation")
    b.add_argument("--walks", required=True)
    b.add_argument("--report", required=True, help="CSV written by the plops command")
    b.add_argument("--mode", choices=BASIN_MODES, default="visit")
    b.add_argument("--out", required=True)
    b.set_defaults(func=cmd_basins)

    n = sub.add_parser("network", help="temperature or basin overlap network")
    n.add_argument("type", choices=("temperature", "overlap"))
    n.add_argument("--walks", required=True)
    n.add_argument("--report", required=True, help="CSV written by the plops command")
    n.add_argument("--basin-mode", choices=BASIN_MODES, default="visit")
    n.add_argument("--exclude-nonwalk", nargs="?", const="from-walk", choices=EXCLUSION_MODES)
    n.add_argument("--path-cap", type=int, default=1000)
    n.add_argument("--seed", type=int, default=0)
    n.add_argument("--out", required=True)
    n.add_argument("--stats", help="also write network statistics as JSON")
    n.set_defaults(func=cmd_network)

    st = sub.add_parser("stats", help="recompute aggregate tables of an experiment bundle")
    st.add_argument("--bundle", required=True)
    st.add_argument("--table", help="only tables whose name starts with this")
    st.add_argument("--plot-data", action="store_true", help="also rewrite plot_data/")
    st.set_defaults(func=cmd_stats)

    e = sub.add_parser("experiment", help="full multi-instance protocol")
    e.add_argument("--config", help="JSON file mirroring ExperimentConfig")
    e.add_argument("--n", type=int, default=16)
    e.add_argument("--k", type=int, nargs="+", default=[4, 8, 12])
    e.add_argument("--estimator-k", type=int, nargs="*", default=[8])
    e.add_argument("--hiff", action="store_true", help="add classic HIFF at the same n")
    e.add_argument("--instances", type=int, default=30)
    e.add_argument("--conditions", nargs="+", default=["ENUM", "AWL", "RAND"])
    e.add_argument("--seed", type=int)
    e.add_argument("--out-dir")
    e.add_argument("--workers", type=int)
    e.set_defaults(func=cmd_experiment)
    return p


def main(argv: list[str] | None = None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:
        # argparse uses 2 for usage errors; 2 is reserved for capability errors here
        return 1 if exc.code == 2 else int(exc.code or 0)
    try:
        return int(args.func(args))
    except LandscapeError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    except (OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
