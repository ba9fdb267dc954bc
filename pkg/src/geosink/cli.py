"""``geosink`` command-line entry point.

Every subcommand reads an optional JSON config file (``--config``), applies
command-line flags on top, validates the merged keys and writes its
artifacts with a ``config`` echo. Exit codes: 0 ok, 2 I/O, 3 validation,
4 numerical failure.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from contextlib import nullcontext
from dataclasses import fields
from importlib import resources

import numpy as np

from . import io as gio
from .barycenter import DistributionFamily, sinkhorn_barycenter, tv_baseline_effect
from .bench import (
    METHODS,
    EbeConfig,
    InterpConfig,
    KnnBenchConfig,
    ebe_experiment,
    interpolation_benchmark,
    knn_benchmark,
)
from .errors import FormatError, GeosinkError, NumericalError, ValidationError
from .graph import estimate_lambda_max, knn_alpha_decay_graph, laplacian
from .heatfilter import build_filter, convergence_study, study_to_csv
from .transport import geodesic_sinkhorn, indicator, pairwise_geodesic

log = logging.getLogger("geosink")

EXIT_OK, EXIT_IO, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4
BUNDLED = "bundled:"


def _graph_keys():
    return {
        "k": (int, 5),
        "alpha": (float, 40.0),
        "laplacian": (str, "combinatorial"),
    }


def _filter_keys():
    return {"t": (float, 1.0), "K": (int, 30), "tol": (float, 1e-6), "max_iter": (int, 500)}


def _dataclass_keys(cls, skip=()):
    kinds = {int: int, float: float, str: str, bool: bool}
    out = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        default = f.default
        if isinstance(default, tuple):
            elem = type(default[0]) if default else int
            out[f.name] = ([elem], list(default))
        elif default is None:
            out[f.name] = ("optional_float", None)
        else:
            out[f.name] = (kinds[type(default)], default)
    return out


# key -> (type, default); list types are written as [elem_type]
SCHEMAS = {
    "graph": {
        "input": (str, None),
        "output": (str, "graph.txt"),
        "label_column": (str, "label"),
        **_graph_keys(),
    },
    "distance": {
        "input": (str, None),
        "output": (str, "distance.json"),
        "matrix_output": (str, None),
        "label_column": (str, "label"),
        "source": (str, None),
        "target": (str, None),
        "mu": (str, None),
        "nu": (str, None),
        **_graph_keys(),
        **_filter_keys(),
    },
    "barycenter": {
        "input": (str, None),
        "output": (str, "barycenter.csv"),
        "report": (str, None),
        "label_column": (str, "label"),
        "members": ([str], None),
        "alphas": ([float], None),
        **_graph_keys(),
        **_filter_keys(),
    },
    "ebe": {
        "input": (str, None),
        "output": (str, "ebe.json"),
        "label": (str, "treated"),
        "label_column": (str, "label"),
        "treated": ([str], None),
        "control": ([str], None),
        **_dataclass_keys(EbeConfig, skip=("seed",)),
    },
    "knn-bench": {
        "output": (str, "knn_bench.json"),
        "matrix_prefix": (str, None),
        "timings": (str, None),
        "seeds": ([int], [0]),
        **_dataclass_keys(KnnBenchConfig, skip=("seed",)),
    },
    "heat-study": {
        "input": (str, BUNDLED + "swiss_roll_200.csv"),
        "output": (str, "heat_study.csv"),
        "label_column": (str, "label"),
        "orders": ([int], list(range(1, 31))),
        **_graph_keys(),
        "t": (float, 0.1),
    },
    "interp": {
        "output": (str, "interp.json"),
        **_dataclass_keys(InterpConfig),
    },
}
SCHEMAS["heat-study"]["laplacian"] = (str, "normalized")
SCHEMAS["ebe"]["outlier"] = ("optional_float", EbeConfig().outlier)
SCHEMAS["knn-bench"]["methods"] = ([str], list(KnnBenchConfig().methods))

HELP = {
    "graph": "build the alpha-decay kNN graph of a point cloud",
    "distance": "geodesic Sinkhorn distance between two distributions, or all label groups",
    "barycenter": "fixed-support barycenter of label groups",
    "ebe": "expected barycenter effect (synthetic outlier experiment or labelled data)",
    "knn-bench": "swiss-roll nearest-neighbour benchmark",
    "heat-study": "Chebyshev vs backward-Euler heat-kernel error study (CSV)",
    "interp": "time-series interpolation benchmark on a sliding spiral",
}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise ValidationError(message)


def _convert(key, kind, raw):
    """Coerce a flag string or JSON value to the schema type."""
    try:
        if isinstance(kind, list):
            if raw is None:
                return None
            if isinstance(raw, str):
                raw = [x for x in raw.split(",") if x.strip()]
            if not isinstance(raw, (list, tuple)):
                raise TypeError
            return [_convert(key, kind[0], x) for x in raw]
        if raw is None:
            return None
        if kind == "optional_float":
            if isinstance(raw, str) and raw.lower() in ("none", "null", ""):
                return None
            return float(raw)
        if kind is bool:
            if isinstance(raw, bool):
                return raw
            if isinstance(raw, str) and raw.lower() in ("true", "1", "yes"):
                return True
            if isinstance(raw, str) and raw.lower() in ("false", "0", "no"):
                return False
            raise TypeError
        if kind is int:
            if isinstance(raw, bool) or (isinstance(raw, float) and not raw.is_integer()):
                raise TypeError
            return int(raw)
        if kind is float:
            if isinstance(raw, bool):
                raise TypeError
            return float(raw)
        return str(raw)
    except (TypeError, ValueError):
        raise ValidationError(f"bad value for {key}: {raw!r}") from None


def _open_text(path: str) -> str:
    if path.startswith(BUNDLED):
        name = path[len(BUNDLED):]
        if not name.endswith((".csv", ".json")):
            name += ".json"
        res = resources.files("geosink") / "data" / name
        if not res.is_file():
            raise FileNotFoundError(f"no bundled resource {name!r}")
        return res.read_text()
    with open(path) as fh:
        return fh.read()


def _resolve_input(path: str):
    """Path usable by the file readers; bundled resources are materialised by name."""
    if path.startswith(BUNDLED):
        return resources.as_file(resources.files("geosink") / "data" / path[len(BUNDLED):])
    return nullcontext(path)


def load_config(subcommand: str, args: argparse.Namespace) -> dict:
    schema = SCHEMAS[subcommand]
    cfg = {k: v for k, (_, v) in schema.items()}
    if args.config:
        try:
            data = json.loads(_open_text(args.config))
        except json.JSONDecodeError as exc:
            raise FormatError(f"{args.config}: {exc}") from None
        if not isinstance(data, dict):
            raise ValidationError("config file must hold a JSON object")
        unknown = sorted(set(data) - set(schema) - {"seed", "threads"})
        if unknown:
            raise ValidationError(f"unknown config keys: {', '.join(unknown)}")
        for key, raw in data.items():
            if key in schema:
                cfg[key] = _convert(key, schema[key][0], raw)
            elif key == "seed":
                args.seed = args.seed if args.seed is not None else _convert(key, int, raw)
            elif key == "threads" and args.threads is None:
                args.threads = _convert(key, int, raw)
    for key, (kind, _) in schema.items():
        raw = getattr(args, key.replace("-", "_"), None)
        if raw is not None:
            cfg[key] = _convert(key, kind, raw)
    return cfg


def set_threads(threads: int | None) -> int | None:
    if threads is None:
        env = os.environ.get("GEOSINK_THREADS")
        if env:
            threads = _convert("GEOSINK_THREADS", int, env)
    if threads is None:
        return None
    if threads < 1:
        raise ValidationError("threads must be >= 1")
    import numba

    threads = min(threads, numba.config.NUMBA_NUM_THREADS)
    numba.set_num_threads(threads)
    return threads


def _require(cfg, key):
    if cfg.get(key) is None:
        raise ValidationError(f"missing required setting {key!r}")
    return cfg[key]


def _load_points(cfg):
    with _resolve_input(_require(cfg, "input")) as path:
        header, _ = gio.read_table(path)
        col = cfg.get("label_column")
        if col is not None and (header is None or col not in header):
            col = None
        return gio.read_points(path, col)


def _build_lap(points, cfg):
    return laplacian(knn_alpha_decay_graph(points, cfg["k"], cfg["alpha"]), cfg["laplacian"])


def _group_indices(labels, wanted=None):
    if labels is None:
        raise ValidationError("input has no label column")
    names = sorted(set(labels.tolist())) if wanted is None else list(wanted)
    out = {}
    for name in names:
        idx = np.flatnonzero(labels == name)
        if idx.size == 0:
            raise ValidationError(f"label {name!r} not found in input")
        out[name] = idx
    return out


def cmd_graph(cfg, args) -> int:
    points, _ = _load_points(cfg)
    A = knn_alpha_decay_graph(points, cfg["k"], cfg["alpha"])
    lap = laplacian(A, cfg["laplacian"])
    nnz = gio.write_graph(cfg["output"], A)
    lam = lap.lambda_max_bound if lap.kind == "normalized" else estimate_lambda_max(lap.matrix)
    print(f"n={lap.n} nnz={nnz} lambda_max={lam!r}")
    return EXIT_OK


def _distribution_from(cfg, key, n):
    w = gio.read_weights(cfg[key])
    if w.shape[0] > n:
        raise ValidationError(f"{key} has weights for {w.shape[0]} vertices, graph has {n}")
    return np.concatenate([w, np.zeros(n - w.shape[0])])


def cmd_distance(cfg, args) -> int:
    points, labels = _load_points(cfg)
    lap = _build_lap(points, cfg)
    filt = build_filter(lap, cfg["t"], cfg["K"])
    n = lap.n
    report = {"config": cfg}
    single = [cfg[k] is not None for k in ("source", "target", "mu", "nu")]
    if any(single):
        if cfg["mu"] is not None and cfg["nu"] is not None:
            mu, nu = _distribution_from(cfg, "mu", n), _distribution_from(cfg, "nu", n)
        elif cfg["source"] is not None and cfg["target"] is not None:
            groups = _group_indices(labels, [cfg["source"], cfg["target"]])
            mu = indicator(n, groups[cfg["source"]])
            nu = indicator(n, groups[cfg["target"]])
        else:
            raise ValidationError("give both mu and nu, or both source and target")
        res = geodesic_sinkhorn(filt, mu, nu, None, cfg["max_iter"], cfg["tol"])
        report.update(cost=res.cost, kl_form=res.kl_form, iterations=res.iterations,
                      converged=res.converged, marginal_error=res.marginal_error)
        print(f"cost={res.cost!r} iterations={res.iterations} converged={str(res.converged).lower()}")
    else:
        groups = _group_indices(labels)
        names = list(groups)
        if len(names) < 2:
            raise ValidationError("need at least two label groups for a distance matrix")
        dists = np.column_stack([indicator(n, groups[g]) for g in names])
        D, ok = pairwise_geodesic(filt, dists, None, cfg["max_iter"], cfg["tol"])
        report.update(labels=names, matrix=D, converged=ok)
        if cfg["matrix_output"]:
            gio.write_matrix_csv(cfg["matrix_output"], D, names)
        print(f"pairs={len(names) * (len(names) - 1) // 2} converged={str(ok).lower()}")
    gio.write_json(cfg["output"], report)
    return EXIT_OK


def cmd_barycenter(cfg, args) -> int:
    points, labels = _load_points(cfg)
    lap = _build_lap(points, cfg)
    filt = build_filter(lap, cfg["t"], cfg["K"])
    groups = _group_indices(labels, cfg["members"])
    fam = DistributionFamily([indicator(lap.n, idx) for idx in groups.values()],
                             cfg["alphas"], "members")
    res = sinkhorn_barycenter(filt, fam, None, cfg["max_iter"], cfg["tol"])
    gio.write_barycenter_csv(cfg["output"], res.barycenter)
    report_path = cfg["report"] or os.path.splitext(cfg["output"])[0] + ".json"
    gio.write_json(report_path, {
        "config": cfg, "members": list(groups), "iterations": res.iterations,
        "converged": res.converged, "marginal_error": res.marginal_error,
    })
    print(f"vertices={lap.n} iterations={res.iterations} converged={str(res.converged).lower()}")
    return EXIT_OK


def cmd_ebe(cfg, args) -> int:
    if cfg["input"] is None:
        ecfg = EbeConfig(**{f.name: cfg[f.name] for f in fields(EbeConfig) if f.name in cfg},
                         seed=args.seed or 0)
        res = ebe_experiment(ecfg)
        tau, base, conv = res.tau, res.baseline_tau, res.converged
    else:
        points, labels = _load_points(cfg)
        lap = _build_lap(points, cfg)
        filt = build_filter(lap, cfg["t"], cfg["K"])
        fams = []
        for key in ("treated", "control"):
            groups = _group_indices(labels, _require(cfg, key))
            fams.append(DistributionFamily([indicator(lap.n, i) for i in groups.values()],
                                           label=key))
        rt = sinkhorn_barycenter(filt, fams[0], None, cfg["max_iter"], cfg["tol"])
        rc = sinkhorn_barycenter(filt, fams[1], None, cfg["max_iter"], cfg["tol"])
        tau = points.T @ rt.barycenter - points.T @ rc.barycenter
        base = tv_baseline_effect(fams[0], fams[1], points)
        conv = rt.converged and rc.converged
    gio.write_json(cfg["output"], {
        "label": cfg["label"], "tau": tau, "baseline_tau": base, "converged": conv,
        "config": {**cfg, "seed": args.seed or 0},
    })
    print(f"tau[0]={float(tau[0])!r} baseline_tau[0]={float(base[0])!r}")
    return EXIT_OK


def cmd_knn_bench(cfg, args) -> int:
    seeds = [args.seed] if args.seed is not None else cfg["seeds"]
    keys = {f.name for f in fields(KnnBenchConfig)} - {"seed"}
    per_seed, timings = [], {}
    for seed in seeds:
        bcfg = KnnBenchConfig(**{k: cfg[k] for k in keys}, seed=seed)
        res = knn_benchmark(bcfg)
        entry = {"seed": seed}
        for meth, rep in res.reports.items():
            d = rep.as_dict()
            timings.setdefault(meth, []).append(d.pop("wall_times"))
            entry[meth] = d
            if cfg["matrix_prefix"]:
                names = [f"d{i}" for i in range(bcfg.n_distributions)]
                gio.write_matrix_csv(f"{cfg['matrix_prefix']}{meth}_seed{seed}.csv",
                                     res.distances[meth], names)
        per_seed.append(entry)
    methods = [m for m in METHODS if m in cfg["methods"]]
    mean = {m: {key: float(np.mean([e[m][key] for e in per_seed]))
                for key in ("spearman", "pearson", "p_at_5")} for m in methods}
    gio.write_json(cfg["output"], {"config": {**cfg, "seeds": seeds}, "per_seed": per_seed,
                                   "mean": mean})
    if cfg["timings"]:
        gio.write_json(cfg["timings"], timings)
    for m in methods:
        secs = sum(sum(t.values()) for t in timings[m])
        print(f"{m}: spearman={mean[m]['spearman']:.3f} p_at_5={mean[m]['p_at_5']:.3f} "
              f"time={secs:.1f}s")
    return EXIT_OK


def cmd_heat_study(cfg, args) -> int:
    points, _ = _load_points(cfg)
    lap = _build_lap(points, cfg)
    if not cfg["orders"]:
        raise ValidationError("orders must not be empty")
    rows = convergence_study(lap, cfg["t"], cfg["orders"])
    with open(cfg["output"], "w") as fh:
        fh.write(study_to_csv(rows))
    K, ec, ee = rows[-1]
    print(f"n={lap.n} K={K} cheb_fro_error={ec:.3e} euler_fro_error={ee:.3e}")
    return EXIT_OK


def cmd_interp(cfg, args) -> int:
    keys = {f.name for f in fields(InterpConfig)}
    icfg = InterpConfig(**{k: cfg[k] for k in keys})
    if args.seed is not None:
        icfg.seeds = (args.seed,)
    res = interpolation_benchmark(icfg)
    gio.write_json(cfg["output"], {"config": res["config"], "per_seed": res["per_seed"],
                                   "mean": res["mean"]})
    print(" ".join(f"{m}={v:.4f}" for m, v in res["mean"].items()))
    return EXIT_OK


COMMANDS = {
    "graph": cmd_graph,
    "distance": cmd_distance,
    "barycenter": cmd_barycenter,
    "ebe": cmd_ebe,
    "knn-bench": cmd_knn_bench,
    "heat-study": cmd_heat_study,
    "interp": cmd_interp,
}


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="geosink", description="Geodesic Sinkhorn on data graphs.")
    sub = parser.add_subparsers(dest="command", parser_class=_Parser)
    for name, schema in SCHEMAS.items():
        p = sub.add_parser(name, help=HELP[name], description=HELP[name])
        p.add_argument("--config", help="JSON file of settings; flags override it "
                                        "(bundled:NAME selects a shipped config)")
        p.add_argument("--seed", type=str, default=None, help="seed for all randomness")
        p.add_argument("--threads", type=str, default=None,
                       help="cap on worker threads (also GEOSINK_THREADS)")
        p.add_argument("--verbose", "-v", action="count", default=0)
        for key, (kind, default) in schema.items():
            hint = "comma-separated list" if isinstance(kind, list) else None
            p.add_argument("--" + key.replace("_", "-"), dest=key.replace("-", "_"),
                           default=None, metavar=key.upper(),
                           help=f"default: {default!r}" + (f" ({hint})" if hint else ""))
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if args.command is None:
            parser.print_help(sys.stderr)
            return EXIT_VALIDATION
        args.seed = _convert("seed", int, args.seed)
        args.threads = _convert("threads", int, args.threads)
        level = logging.WARNING - 10 * min(args.verbose, 2)
        logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s",
                            stream=sys.stderr)
        cfg = load_config(args.command, args)
        set_threads(args.threads)
        t0 = time.perf_counter()
        code = COMMANDS[args.command](cfg, args)
        log.info("%s finished in %.2fs", args.command, time.perf_counter() - t0)
        return code
    except ValidationError as exc:
        print(f"geosink: error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except NumericalError as exc:
        print(f"geosink: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (OSError, GeosinkError) as exc:
        print(f"geosink: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
