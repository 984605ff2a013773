"""Command-line entry point: generate, fit, metrics, sweep, robustness.

Every config field has a flag (``--trust-radius 0.05``); a ``--config`` JSON
file overrides flags. The effective config is echoed into each manifest.
Exit status is 0 on success, 1 on invalid input and 2 on numerical failure.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
import time
from pathlib import Path

import numpy as np

from . import __version__
from .errors import NumericalError, ValidationError
from .graph import build_graph
from .io import (
    load_matrix,
    read_json,
    save_matrix,
    write_manifest,
    write_table,
)
from .metrics import RECOVERY_THRESHOLD, evaluate
from .model import standardize
from .robustness import (
    DEFAULT_ETAS,
    cluster_means,
    correlation_bank,
    eta_sweep,
    make_bank,
    permutation_curve,
    threshold_clusters,
)
from .solver import SolverConfig, fit
from .sweep import COLUMNS, SOLVERS, noise_sweep
from .synthetic import SyntheticConfig, generate_instance

log = logging.getLogger("gcica")

EXIT_OK, EXIT_INVALID, EXIT_NUMERICAL = 0, 1, 2


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    # argparse exits with 2 on bad flags, which would collide with the numerical-failure code
    def error(self, message):
        self.print_usage(sys.stderr)
        raise _UsageError(f"{self.prog}: error: {message}")


def _flag(name, prefix=""):
    return "--" + prefix + name.replace("_", "-")


def _add_fields(parser, cls, prefix="", skip=("seed",)):
    group = parser.add_argument_group(f"{cls.__name__} fields")
    for f in dataclasses.fields(cls):
        if f.name in skip:
            continue
        default = f.default
        if isinstance(default, bool):
            kind = lambda s: s.lower() in ("1", "true", "yes")  # noqa: E731
        elif isinstance(default, int):
            kind = int
        elif isinstance(default, str):
            kind = str
        else:
            kind = float
        group.add_argument(_flag(f.name, prefix), dest=prefix.replace("-", "_") + f.name,
                           type=kind, default=None, metavar=type(default).__name__.upper()
                           if default is not None else "FLOAT",
                           help=f"default {default!r}")


def _build(cls, args, overrides, prefix="", seed=None):
    """Defaults, then flags, then the JSON overrides."""
    values = {}
    for f in dataclasses.fields(cls):
        if f.name == "seed":
            continue
        v = getattr(args, prefix.replace("-", "_") + f.name, None)
        if v is not None:
            values[f.name] = v
    unknown = set(overrides) - {f.name for f in dataclasses.fields(cls)}
    if unknown:
        raise ValidationError(f"unknown {cls.__name__} keys in config: {sorted(unknown)}")
    values.update(overrides)
    if seed is not None and "seed" in _field_names(cls):
        values["seed"] = seed
    return cls(**values)


def _section(config, name, flat_keys):
    if name in config:
        return dict(config[name])
    return {k: v for k, v in config.items() if k in flat_keys}


def _load_config(args, allowed):
    config = read_json(args.config) if args.config else {}
    if not isinstance(config, dict):
        raise ValidationError("--config must hold a JSON object")
    unknown = set(config) - set(allowed) - {"seed"}
    if unknown:
        raise ValidationError(f"unknown config keys for {args.command}: {sorted(unknown)}")
    return config


def _field_names(cls):
    return {f.name for f in dataclasses.fields(cls)}


def _seed(args, config):
    return int(config.get("seed", args.seed))


def _graph_from(path):
    w = load_matrix(path)
    return build_graph(w)


# subcommands -----------------------------------------------------------------
def cmd_generate(args):
    config = _load_config(args, _field_names(SyntheticConfig) | {"synthetic"})
    seed = _seed(args, config)
    cfg = _build(SyntheticConfig, args, _section(config, "synthetic", _field_names(SyntheticConfig) - {"seed"}),
                 seed=seed)
    inst = generate_instance(cfg)
    out = Path(args.out)
    files = [
        save_matrix(inst.graph.weights, out / "adjacency.csv", "adjacency"),
        save_matrix(inst.true_components, out / "components.csv", "true loadings, K x N"),
        save_matrix(inst.scaled_components, out / "scaled_components.csv",
                    "loadings of the standardized observations, K x N"),
        save_matrix(inst.observations, out / "observations.csv", "standardized observations, T x N"),
    ]
    if args.trace:
        files.append(save_matrix(inst.sources, out / "sources.csv", "sources, T x K"))
    write_manifest(out / "manifest.json", {
        "command": "generate",
        "version": __version__,
        "seed": seed,
        "synthetic": cfg.to_dict(),
        "supports": inst.component_supports,
    }, files)
    print(f"wrote {len(files)} matrices to {out}")


def cmd_fit(args):
    config = _load_config(args, _field_names(SolverConfig) | {"solver"})
    seed = _seed(args, config)
    cfg = _build(SolverConfig, args, _section(config, "solver", _field_names(SolverConfig) - {"seed"}), seed=seed)
    if not args.timeseries or not args.adjacency:
        raise ValidationError("fit needs --timeseries and --adjacency")
    y = load_matrix(args.timeseries)
    if args.standardize:
        y = standardize(y)
    graph = _graph_from(args.adjacency)
    init = load_matrix(args.init) if args.init else None
    res = fit(y, graph, cfg, init=init)
    out = Path(args.out)
    files = [
        save_matrix(res.loadings, out / "loadings.csv", "loadings, K x N"),
        save_matrix(res.gamma[None, :], out / "gamma.csv", "noise variances, 1 x N"),
    ]
    if args.trace:
        files.append(write_table(out / "trace.csv", [
            {"iter": i + 1, "stein_loss": l, "objective": o, "best_objective": b}
            for i, (l, o, b) in enumerate(zip(res.loss_trace, res.objective_trace, res.best_trace))
        ], ("iter", "stein_loss", "objective", "best_objective")))
    write_manifest(out / "manifest.json", {
        "command": "fit",
        "version": __version__,
        "seed": seed,
        "inputs": {"timeseries": str(args.timeseries), "adjacency": str(args.adjacency),
                   "init": str(args.init) if args.init else None, "standardize": bool(args.standardize)},
        "solver": cfg.to_dict(),
        "result": res.summary(),
    }, files)
    print(f"fit: {res.outer_iters} outer iterations, stein loss {res.final_loss:.6g}, "
          f"converged={res.converged}")


def cmd_metrics(args):
    config = _load_config(args, {"threshold"})
    if not (args.loadings and args.truth and args.adjacency):
        raise ValidationError("metrics needs --loadings, --truth and --adjacency")
    threshold = float(config.get("threshold", args.threshold))
    rec = load_matrix(args.loadings)
    truth = load_matrix(args.truth)
    graph = _graph_from(args.adjacency)
    supports = None
    if args.supports:
        data = read_json(args.supports)
        supports = data["supports"] if isinstance(data, dict) else data
    rep = evaluate(rec, truth, graph, supports, threshold)
    out = Path(args.out)
    write_manifest(out / "metrics.json", {
        "command": "metrics",
        "version": __version__,
        "inputs": {"loadings": str(args.loadings), "truth": str(args.truth),
                   "adjacency": str(args.adjacency), "supports": args.supports},
        "threshold": threshold,
        "metrics": rep.to_dict(),
    })
    print(f"n_recovered={rep.n_recovered} mean_top5={rep.mean_top5:.4f} "
          f"spread={rep.spread:.4g} localization={rep.localization:.4g}")


def cmd_sweep(args):
    config = _load_config(args, {"synthetic", "solver", "sigmas", "trials", "solvers", "reference"})
    seed = _seed(args, config)
    synth = _build(SyntheticConfig, args, _section(config, "synthetic", set()), prefix="synth-")
    solver = _build(SolverConfig, args, _section(config, "solver", set()))
    sigmas = [float(s) for s in config.get("sigmas", args.sigmas)]
    trials = int(config.get("trials", args.trials))
    solvers = list(config.get("solvers", args.solvers))
    reference = config.get("reference", args.reference)
    if trials < 1:
        raise ValidationError("--trials must be >= 1")
    rows = noise_sweep(sigmas, trials, solvers, synth, solver, seed, args.threads, reference)
    out = Path(args.out)
    files = [write_table(out / "sweep.csv", rows, COLUMNS)]
    write_manifest(out / "manifest.json", {
        "command": "sweep",
        "version": __version__,
        "seed": seed,
        "sigmas": sigmas,
        "trials": trials,
        "solvers": solvers,
        "reference": reference,
        "synthetic": synth.to_dict(),
        "solver": solver.to_dict(),
        "n_failed": sum(r["status"] == "failed" for r in rows),
    }, files)
    print(f"sweep: {len(rows)} rows written to {out / 'sweep.csv'}")


def _read_bank(directory, labels_path):
    directory = Path(directory)
    labels = read_json(labels_path or directory / "labels.json")
    if not isinstance(labels, dict) or not labels:
        raise ValidationError("labels manifest must map file names to {subject, scan}")
    rows, subj, scan, fid = [], [], [], []
    for i, name in enumerate(sorted(labels)):
        entry = labels[name]
        if not isinstance(entry, dict) or "subject" not in entry:
            raise ValidationError(f"labels entry for {name!r} needs a 'subject' key")
        comps = load_matrix(directory / name)
        rows.append(comps)
        subj += [str(entry["subject"])] * comps.shape[0]
        scan += [str(entry.get("scan", name))] * comps.shape[0]
        fid += [i] * comps.shape[0]
    widths = {r.shape[1] for r in rows}
    if len(widths) != 1:
        raise ValidationError(f"component files disagree on N: {sorted(widths)}")
    return make_bank(np.vstack(rows), np.array(subj), np.array(scan), np.array(fid))


def cmd_robustness(args):
    config = _load_config(args, {"kmax", "n_perm", "eta", "etas", "top_n"})
    seed = _seed(args, config)
    if not args.inputs:
        raise ValidationError("robustness needs --inputs DIR")
    kmax = int(config.get("kmax", args.kmax))
    n_perm = int(config.get("n_perm", args.n_perm))
    eta = float(config.get("eta", args.eta))
    etas = [float(e) for e in config.get("etas", args.etas)]
    top_n = int(config.get("top_n", args.top_n))
    bank = _read_bank(args.inputs, args.labels)
    corr = correlation_bank(bank)
    kmax = min(kmax, bank.n_rows - 1)
    subj = permutation_curve(corr, bank.subject_labels, kmax, n_perm, seed, "subject", threads=args.threads)
    sess = permutation_curve(corr, bank.subject_labels, kmax, n_perm, seed, "session",
                             scans=bank.scan_labels, threads=args.threads)
    report = threshold_clusters(corr, eta)
    means = cluster_means(bank, report, top_n)
    out = Path(args.out)
    files = [save_matrix(m[None, :], out / f"cluster_mean_{i + 1}.csv", f"mean of cluster {i + 1}")
             for i, m in enumerate(means)]

    def curve(res):
        return [{"k": int(k), "statistic": float(o), "p_value": float(p),
                 "count": float(c), "count_p_value": float(cp)}
                for k, o, p, c, cp in zip(res.k, res.observed, res.p_value,
                                          res.count_observed, res.count_p_value)]

    write_manifest(out / "robustness.json", {
        "command": "robustness",
        "version": __version__,
        "seed": seed,
        "n_rows": bank.n_rows,
        "n_dropped_constant": bank.n_dropped,
        "n_permutations": n_perm,
        "subject": curve(subj),
        "session": curve(sess),
        "eta_sweep": [{"eta": e, "largest": s} for e, s in eta_sweep(corr, etas)],
        "clusters": {"eta": eta, "sizes": report.sizes[:top_n].tolist(), "n_clusters": report.n_clusters},
    }, files)
    print(f"robustness: {bank.n_rows} components, s_1={subj.observed[0]:.4g} (p={subj.p_value[0]:.3g})")


# parser ------------------------------------------------------------------------
def _common(p, seed=True):
    p.add_argument("--out", default=".", help="output directory (created if missing)")
    p.add_argument("--config", help="JSON file whose values override flags")
    if seed:
        p.add_argument("--seed", type=int, default=0, help="master seed for all randomness")
    p.add_argument("--threads", type=int, default=1, help="maximum worker threads")
    p.add_argument("--trace", action="store_true", help="write per-iteration traces")
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="gcica", description="Graph-constrained sparse non-negative ICA.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("generate", help="sample a synthetic instance")
    _common(p)
    _add_fields(p, SyntheticConfig)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("fit", help="fit loadings to a time series")
    _common(p)
    p.add_argument("--timeseries", help="T x N comma-separated matrix")
    p.add_argument("--adjacency", help="N x N comma-separated weight matrix")
    p.add_argument("--init", help="K x N warm-start loadings")
    p.add_argument("--standardize", action="store_true", help="standardize the time series first")
    _add_fields(p, SolverConfig)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("metrics", help="score recovered loadings against a truth")
    _common(p, seed=False)
    p.add_argument("--loadings", help="recovered K x N matrix")
    p.add_argument("--truth", help="true K' x N matrix")
    p.add_argument("--adjacency", help="N x N weight matrix")
    p.add_argument("--supports", help="JSON with per-component supports (a generate manifest works)")
    p.add_argument("--threshold", type=float, default=RECOVERY_THRESHOLD)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("sweep", help="paired noise sweep of both solvers")
    _common(p)
    p.add_argument("--sigmas", type=float, nargs="+", default=[0.0, 0.01, 0.1, 1.0])
    p.add_argument("--trials", type=int, default=10)
    p.add_argument("--solvers", nargs="+", choices=SOLVERS, default=list(SOLVERS))
    p.add_argument("--reference", choices=("scaled", "raw"), default="scaled")
    _add_fields(p, SyntheticConfig, prefix="synth-", skip=("seed", "noise_sigma"))
    _add_fields(p, SolverConfig)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("robustness", help="cross-fit k-NN tests and clustering")
    _common(p)
    p.add_argument("--inputs", help="directory of K x N loading files")
    p.add_argument("--labels", help="JSON mapping file name -> {subject, scan} (default INPUTS/labels.json)")
    p.add_argument("--kmax", type=int, default=10)
    p.add_argument("--n-perm", type=int, default=1000)
    p.add_argument("--eta", type=float, default=0.7, help="threshold for the reported clusters")
    p.add_argument("--etas", type=float, nargs="+", default=list(DEFAULT_ETAS))
    p.add_argument("--top-n", type=int, default=5)
    p.set_defaults(func=cmd_robustness)
    return parser


def run(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except _UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    t0 = time.perf_counter()
    try:
        args.func(args)
    except NumericalError as exc:
        print(f"gcica {args.command}: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (ValidationError, ValueError, TypeError, OSError, KeyError) as exc:
        print(f"gcica {args.command}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
    return EXIT_OK


def main() -> None:
    sys.exit(run())
