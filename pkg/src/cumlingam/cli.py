"""Command line: simulate, discover, eval, bench and cumulants.

Exit codes: 0 success, 2 usage, 3 input format, 4 internal error.
"""
from __future__ import annotations

import argparse
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .config import Config
from .cumulants import Dataset, cumulant4_variance, joint_cumulant, MAX_JOINT_ORDER
from .discovery import discover
from .errors import CumLingamError, InputShapeError, LabelMismatchError, UnsupportedOrderError
from .evaluate import evaluate
from .formats import (FormatError, dumps, graph_dumps, graph_loads, graph_to_dot,
                      mixing_to_dict, read_csv, read_json, sha256_file, write_csv,
                      write_json)
from .seeding import derive_seed
from .simulate import N_CASES, ModelSpec, build_case, ground_truth_mixing, random_model, sample

EXIT_OK, EXIT_USAGE, EXIT_FORMAT, EXIT_INTERNAL = 0, 2, 3, 4
JOBS_ENV = "CUMLINGAM_JOBS"
FAILED = "failed"
METRICS = ("nonadjacent_f1", "directed_f1", "rmse")


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# config handling


def _convert(name: str, typ, text: str):
    typ = str(typ)
    text = text.strip()
    if "None" in typ and text.lower() in ("none", ""):
        return None
    try:
        if typ.startswith("bool"):
            low = text.lower()
            if low not in ("true", "false", "1", "0", "yes", "no"):
                raise ValueError(text)
            return low in ("true", "1", "yes")
        if typ.startswith("int"):
            return int(text)
        if typ.startswith("float"):
            return float(text)
    except ValueError:
        raise UsageError(f"bad value for {name}: {text!r}") from None
    return text


def parse_config_text(text: str, source: str = "<config>") -> dict:
    """key = value lines; '#' starts a comment."""
    types = Config.field_types()
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{source}: line {lineno}: expected key=value")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in types:
            raise FormatError(f"{source}: line {lineno}: unknown key {key!r}")
        out[key] = _convert(key, types[key], val)
    return out


def build_config(config_file=None, overrides=(), seed=None) -> Config:
    kw = {}
    if config_file:
        try:
            text = Path(config_file).read_text()
        except OSError as exc:
            raise FormatError(f"{config_file}: cannot read: {exc.strerror}") from exc
        kw.update(parse_config_text(text, str(config_file)))
    types = Config.field_types()
    for item in overrides or ():
        if "=" not in item:
            raise UsageError(f"--set expects key=value, got {item!r}")
        key, val = item.split("=", 1)
        key = key.strip()
        if key not in types:
            raise UsageError(f"unknown config key {key!r}")
        kw[key] = _convert(key, types[key], val)
    if seed is not None:
        kw["seed"] = seed
    try:
        return Config(**kw)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _jobs(value) -> int:
    if value is not None:
        return max(1, int(value))
    env = os.environ.get(JOBS_ENV)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise UsageError(f"{JOBS_ENV} must be an integer, got {env!r}") from None
    return 1


def _out_dir(path) -> Path:
    p = Path(path)
    try:
        p.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"{p}: cannot create output directory: {exc.strerror}") from exc
    return p


def write_manifest(out: Path, command: str, cfg: dict | None, seed, inputs, outputs,
                   started: float) -> Path:
    doc = {
        "command": command,
        "version": __version__,
        "seed": seed,
        "config": cfg,
        "inputs": {str(p): sha256_file(p) for p in inputs},
        "outputs": {str(p): sha256_file(p) for p in outputs},
        "wall_time": time.perf_counter() - started,
    }
    path = out / "manifest.json"
    write_json(path, doc)
    return path


# ---------------------------------------------------------------------------
# commands


def _make_spec(args) -> ModelSpec:
    if args.random:
        return random_model(args.p, args.latents, args.density, seed=args.seed)
    if args.case is None:
        raise UsageError("give --case K or --random")
    if not 1 <= args.case <= N_CASES:
        raise UsageError(f"case id must be in 1..{N_CASES}, got {args.case}")
    return build_case(args.case, seed=args.seed, noise_kind=args.noise)


def truth_document(spec: ModelSpec) -> dict:
    return {"model": spec.to_dict(), "graph": spec.graph().to_dict(),
            "mixing": mixing_to_dict(ground_truth_mixing(spec))}


def cmd_simulate(args) -> int:
    t0 = time.perf_counter()
    spec = _make_spec(args)
    if args.n < 1:
        raise UsageError("--n must be positive")
    data = sample(spec, args.n, seed=args.seed)
    out = _out_dir(args.out)
    data_path, truth_path = out / "data.csv", out / "truth.json"
    write_csv(data_path, data)
    write_json(truth_path, truth_document(spec))
    write_manifest(out, "simulate", None, args.seed, [], [data_path, truth_path], t0)
    print(f"wrote {data_path} ({args.n} rows, {spec.p} columns) and {truth_path}")
    return EXIT_OK


def cmd_discover(args) -> int:
    t0 = time.perf_counter()
    cfg = build_config(args.config, args.set, args.seed)
    data = read_csv(args.data)
    if data.n_vars < 3:
        raise UsageError(f"discover needs at least 3 columns, {args.data} has {data.n_vars}")
    graph, mixing = discover(data, cfg)
    out = _out_dir(args.out)
    paths = {"graph": out / "graph.json", "dot": out / "graph.dot", "mixing": out / "mixing.json"}
    paths["graph"].write_text(graph_dumps(graph))
    paths["dot"].write_text(graph_to_dot(graph))
    write_json(paths["mixing"], mixing_to_dict(mixing))
    write_manifest(out, "discover", cfg.as_dict(), cfg.seed, [args.data], list(paths.values()), t0)
    for w in graph.warnings:
        print(f"warning: {w}", file=sys.stderr)
    print(f"{len(graph.latents)} latent(s), {len(graph.directed)} directed, "
          f"{len(graph.undirected)} undirected edge(s); wrote {out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    graph = graph_loads(Path(args.graph).read_text(), str(args.graph))
    doc = read_json(args.truth)
    try:
        spec = ModelSpec.from_dict(doc["model"] if "model" in doc else doc)
    except (KeyError, TypeError) as exc:
        raise FormatError(f"{args.truth}: not a truth document: {exc}") from None
    report = evaluate(graph, spec)
    text = dumps(report.to_dict())
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _parse_index(spec: str, data: Dataset) -> list[str]:
    labels = [s.strip() for s in spec.split(",") if s.strip()]
    if not labels:
        raise UsageError("--idx needs comma separated column names")
    for lab in labels:
        if lab not in data.labels:
            raise UsageError(f"unknown column {lab!r}; columns are {', '.join(data.labels)}")
    return labels


def cmd_cumulants(args) -> int:
    data = read_csv(args.data)
    labels = _parse_index(args.idx, data)
    k = len(labels)
    if not 2 <= k <= MAX_JOINT_ORDER:
        raise UnsupportedOrderError(
            f"order {k} is not supported here (2..{MAX_JOINT_ORDER}); two-variable "
            f"cumulants up to order 6 are available through cumulants.cum_ab")
    est = joint_cumulant(data, labels, with_se=True, n_groups=args.groups)
    print(f"cum({', '.join(labels)}) = {est.value:.10g}")
    print(f"jackknife se = {est.standard_error:.6g}")
    if k == 4 and len(set(labels)) == 1:
        print(f"fourth-cumulant variance = {cumulant4_variance(data.column(labels[0])):.6g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# bench


def run_cell(case: int, n: int, trial: int, seed: int, cfg_dict: dict) -> dict:
    """simulate -> discover -> evaluate for one benchmark trial."""
    t0 = time.perf_counter()
    out = {"case": case, "n": n, "trial": trial}
    try:
        spec = build_case(case, seed=derive_seed(seed, "bench", case, trial, "model"))
        data = sample(spec, n, seed=derive_seed(seed, "bench", case, n, trial, "data"))
        cfg = Config(**{**cfg_dict, "seed": derive_seed(seed, "bench", case, n, trial, "search")})
        graph, _ = discover(data, cfg)
        rep = evaluate(graph, spec)
        out.update(ok=True, nonadjacent_f1=rep.nonadjacent.f1, directed_f1=rep.directed.f1,
                   rmse=rep.rmse, latents=len(graph.latents),
                   undirected=len(graph.undirected), error="")
    except Exception as exc:  # a failed cell must not abort the sweep
        out.update(ok=False, error=f"{type(exc).__name__}: {exc}")
    out["seconds"] = time.perf_counter() - t0
    return out


def _cell_text(vals) -> str:
    return f"{np.mean(vals):.4f} ({np.var(vals):.4f})"


def bench_tables(results: list[dict], cases, ns) -> dict[str, str]:
    """Per-metric CSV text: one row per case, one 'mean (variance)' column per N."""
    tables = {}
    for metric in METRICS:
        lines = ["case," + ",".join(f"N={n}" for n in ns)]
        for c in cases:
            row = [str(c)]
            for n in ns:
                cell = [r for r in results if r["case"] == c and r["n"] == n]
                if any(not r["ok"] for r in cell) or not cell:
                    row.append(FAILED)
                else:
                    row.append(_cell_text([r[metric] for r in cell]))
            lines.append(",".join(row))
        tables[metric] = "\n".join(lines) + "\n"
    return tables


def _int_list(text: str, name: str) -> list[int]:
    try:
        vals = [int(s) for s in text.split(",") if s.strip()]
    except ValueError:
        raise UsageError(f"{name} expects comma separated integers, got {text!r}") from None
    if not vals:
        raise UsageError(f"{name} is empty")
    return vals


def cmd_bench(args) -> int:
    t0 = time.perf_counter()
    cases = _int_list(args.cases, "--cases")
    ns = _int_list(args.n, "--n")
    bad = [c for c in cases if not 1 <= c <= N_CASES]
    if bad:
        raise UsageError(f"case ids must be in 1..{N_CASES}, got {bad}")
    if args.trials < 1:
        raise UsageError("--trials must be positive")
    cfg = build_config(args.config, args.set, None)
    cfg_dict = cfg.as_dict()
    jobs = _jobs(args.jobs)
    cells = [(c, n, t) for c in cases for n in ns for t in range(args.trials)]
    if jobs == 1:
        results = [run_cell(c, n, t, args.seed, cfg_dict) for c, n, t in cells]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            futs = [pool.submit(run_cell, c, n, t, args.seed, cfg_dict) for c, n, t in cells]
            results = [f.result() for f in futs]
    results.sort(key=lambda r: (r["case"], r["n"], r["trial"]))
    out = _out_dir(args.out)
    written = []
    for metric, text in bench_tables(results, cases, ns).items():
        path = out / f"table_{metric}.csv"
        path.write_text(text)
        written.append(path)
    trials_path = out / "trials.csv"
    cols = ["case", "n", "trial", "ok", "nonadjacent_f1", "directed_f1", "rmse",
            "latents", "undirected", "error"]
    lines = [",".join(cols)]
    for r in results:
        vals = []
        for c in cols:
            v = r.get(c, "")
            vals.append(format(v, ".17g") if isinstance(v, float) else str(v).replace(",", ";"))
        lines.append(",".join(vals))
    trials_path.write_text("\n".join(lines) + "\n")
    written.append(trials_path)
    # wall time varies from run to run, so it lives apart from the metric tables
    time_path = out / "wall_time.csv"
    tl = ["case," + ",".join(f"N={n}" for n in ns)]
    for c in cases:
        row = [str(c)]
        for n in ns:
            secs = [r["seconds"] for r in results if r["case"] == c and r["n"] == n]
            row.append(f"{np.mean(secs):.3f}")
        tl.append(",".join(row))
    time_path.write_text("\n".join(tl) + "\n")
    written.append(time_path)
    write_manifest(out, "bench", cfg_dict, args.seed, [], written, t0)
    failed = sum(not r["ok"] for r in results)
    print(f"{len(results)} trials, {failed} failed; tables in {out}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="cumlingam", description="Causal discovery with latent confounders "
                "from higher-order cumulants.")
    p.add_argument("--version", action="version", version=__version__)
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="sample a benchmark case or a random model")
    s.add_argument("--case", type=int)
    s.add_argument("--random", action="store_true")
    s.add_argument("--p", type=int, default=6)
    s.add_argument("--latents", type=int, default=1)
    s.add_argument("--density", type=float, default=0.2)
    s.add_argument("--noise", default="cubed_gaussian")
    s.add_argument("--n", type=int, default=2000)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default=".")
    s.set_defaults(func=cmd_simulate)

    def add_cfg(sp):
        sp.add_argument("--config", help="key=value file overriding defaults")
        sp.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override one config field (repeatable)")

    d = sub.add_parser("discover", help="learn a graph from a CSV file")
    d.add_argument("data")
    d.add_argument("--seed", type=int)
    d.add_argument("--out", default=".")
    add_cfg(d)
    d.set_defaults(func=cmd_discover)

    e = sub.add_parser("eval", help="score graph.json against truth.json")
    e.add_argument("graph")
    e.add_argument("truth")
    e.add_argument("--out", help="write metrics JSON here instead of stdout")
    e.set_defaults(func=cmd_eval)

    b = sub.add_parser("bench", help="simulate, discover and score a grid of cases")
    b.add_argument("--cases", default="1,2")
    b.add_argument("--n", default="1000")
    b.add_argument("--trials", type=int, default=10)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--jobs", type=int, help=f"worker processes (default ${JOBS_ENV} or 1)")
    b.add_argument("--out", default="bench")
    add_cfg(b)
    b.set_defaults(func=cmd_bench)

    c = sub.add_parser("cumulants", help="print a joint cumulant estimate")
    c.add_argument("data")
    c.add_argument("--idx", required=True, help="comma separated column names")
    c.add_argument("--groups", type=int, default=20, help="jackknife groups")
    c.set_defaults(func=cmd_cumulants)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        return args.func(args)
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    except UsageError as exc:
        print(f"cumlingam: usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except UnsupportedOrderError as exc:
        print(f"cumlingam: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (FormatError, InputShapeError, LabelMismatchError) as exc:
        print(f"cumlingam: input error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except OSError as exc:
        print(f"cumlingam: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except CumLingamError as exc:
        print(f"cumlingam: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except Exception as exc:
        print(f"cumlingam: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
