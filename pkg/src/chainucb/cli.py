"""Command-line front end.

Subcommands
-----------
run
    Execute an experiment from a config file and write a per-iteration trace
    CSV and a per-iteration aggregate CSV.
cover
    Greedy epsilon-cover of a point file, a graph file or a generated space.
bound-check
    Run Chaining-UCB with the regret-bound diagnostic and report how often
    the bound was violated.

Exit status is 0 on success, 1 when a run fails and 2 for usage or
configuration errors.
"""

from __future__ import annotations

import argparse
import csv
import math
import sys
from dataclasses import fields
from pathlib import Path

import numpy as np
from scipy.spatial.distance import cdist

from . import __version__
from .bench import (
    POLICIES,
    ConfigError,
    ExperimentConfig,
    RunError,
    aggregate,
    bound_violation_stats,
    run_experiment,
    stream,
    uniform_design,
)
from .cover import DenseDistance, greedy_cover, max_degree
from .kernel import KernelSpec, kernel_matrix, read_graphs

__all__ = ["main", "parse_config", "format_config", "load_config", "RunSettings"]

EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

TRACE_COLUMNS = ["policy", "run", "t", "chosen", "y", "inst_regret", "simple_regret", "cum_regret", "bound"]
AGGREGATE_COLUMNS = ["policy", "t", "mean_simple_regret", "sd_simple_regret", "mean_cum_regret"]

# keys accepted in a config file besides the ExperimentConfig fields
OUTPUT_KEYS = ("out_dir", "name")


def fmt(x) -> str:
    """Ten significant digits, the format of every number written by the CLI."""
    return "%.10g" % x


class ConfigFileError(ValueError):
    """A config file problem, tagged with the offending key and line when known."""

    def __init__(self, message, key=None, line=None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)
        self.key = key
        self.line = line


class RunSettings:
    """Parsed config file: an :class:`ExperimentConfig` plus output settings."""

    def __init__(self, config: ExperimentConfig, out_dir: str = ".", name: str = "experiment", lines=None):
        self.config = config
        self.out_dir = out_dir
        self.name = name
        self.lines = dict(lines or {})

    def __eq__(self, other):
        if not isinstance(other, RunSettings):
            return NotImplemented
        return (self.config, self.out_dir, self.name) == (other.config, other.out_dir, other.name)


# -- value codecs ---------------------------------------------------------------

_INT = {"size", "dim", "n_init", "n_iters", "n_runs", "base_seed", "max_sample_size", "min_nodes", "max_nodes"}
_FLOAT = {"noise_sd", "delta", "jitter", "himmelblau_scale"}
_PAIR = {"box", "himmelblau_trend"}
_AUTO_FLOAT = {"bandwidth", "edge_prob"}
_NONE_WORDS = {"none", "auto", "default"}


def _parse_value(key, text):
    low = text.lower()
    if key in _INT:
        return int(text)
    if key in _FLOAT:
        return float(text)
    if key in _AUTO_FLOAT:
        return None if low in _NONE_WORDS else float(text)
    if key in _PAIR:
        if low in _NONE_WORDS:
            if key == "box":
                return None
            raise ValueError("expected two comma-separated numbers")
        parts = [p.strip() for p in text.split(",")]
        if len(parts) != 2:
            raise ValueError("expected two comma-separated numbers")
        return (float(parts[0]), float(parts[1]))
    if key == "policies":
        return tuple(p.strip() for p in text.split(",") if p.strip())
    if key == "bound":
        if low in ("true", "yes", "1", "on"):
            return True
        if low in ("false", "no", "0", "off"):
            return False
        raise ValueError("expected true or false")
    if key == "graph_file":
        return None if low == "none" else text
    return text


def _format_value(key, value) -> str:
    if value is None:
        return "auto" if key in _AUTO_FLOAT else "none"
    if key in _PAIR:
        return f"{value[0]!r}, {value[1]!r}"
    if key == "policies":
        return ", ".join(value)
    if key == "bound":
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def parse_config(text: str, default_name: str = "experiment") -> RunSettings:
    """Parse a flat ``key = value`` config; ``#`` starts a comment.

    Raises
    ------
    ConfigFileError
        Unknown or repeated key, malformed line or value, or a value that
        fails :meth:`ExperimentConfig.validate`.
    """
    known = set(ExperimentConfig.field_names()) | set(OUTPUT_KEYS)
    values, lines = {}, {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigFileError("expected 'key = value'", line=lineno)
        key, _, val = (s.strip() for s in line.partition("="))
        if key not in known:
            raise ConfigFileError("unknown key", key, lineno)
        if key in values:
            raise ConfigFileError("repeated key", key, lineno)
        try:
            values[key] = _parse_value(key, val)
        except ValueError as exc:
            raise ConfigFileError(f"bad value {val!r} ({exc})", key, lineno) from None
        lines[key] = lineno
    out_dir = values.pop("out_dir", ".")
    name = values.pop("name", default_name)
    try:
        config = ExperimentConfig(**values)
    except ConfigError as exc:
        key = str(exc).split(":", 1)[0]
        raise ConfigFileError(str(exc).split(": ", 1)[-1], key, lines.get(key)) from None
    return RunSettings(config, out_dir, name, lines)


def format_config(settings: RunSettings) -> str:
    """Serialize every setting, one ``key = value`` line each."""
    out = [f"out_dir = {settings.out_dir}", f"name = {settings.name}"]
    for f in fields(ExperimentConfig):
        out.append(f"{f.name} = {_format_value(f.name, getattr(settings.config, f.name))}")
    return "\n".join(out) + "\n"


def load_config(path) -> RunSettings:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigFileError(f"cannot read config {str(path)!r}: {exc.strerror or exc}") from None
    return parse_config(text, default_name=path.stem)


# -- output --------------------------------------------------------------------


def _cell(x) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, (int, np.integer, str)):
        return str(x)
    return fmt(x)


def trace_rows(results):
    for policy, traces in results.items():
        for tr in traces:
            for s in range(len(tr)):
                bound = None if tr.bound is None else float(tr.bound[s])
                yield [
                    policy, tr.run, s + 1, int(tr.chosen[s]), float(tr.y[s]),
                    float(tr.inst_regret[s]), float(tr.simple_regret[s]), float(tr.cum_regret[s]), bound,
                ]


def aggregate_rows(results):
    for policy, traces in results.items():
        agg = aggregate(traces)
        for s in range(len(agg.mean_simple)):
            yield [policy, s + 1, float(agg.mean_simple[s]), float(agg.sd_simple[s]), float(agg.mean_cum[s])]


def write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_cell(x) for x in row])


def summary_table(results) -> str:
    head = f"{'policy':<14}{'runs':>6}{'mean S_n':>18}{'sd S_n':>18}{'mean R_n':>18}"
    lines = [head, "-" * len(head)]
    for policy, traces in results.items():
        agg = aggregate(traces)
        lines.append(
            f"{policy:<14}{agg.n_runs:>6}{fmt(agg.mean_simple[-1]):>18}"
            f"{fmt(agg.sd_simple[-1]):>18}{fmt(agg.mean_cum[-1]):>18}"
        )
    return "\n".join(lines)


# -- subcommands ---------------------------------------------------------------


def _settings_from_args(args) -> RunSettings:
    settings = load_config(args.config)
    changes = {}
    if args.seed is not None:
        changes["base_seed"] = args.seed
    if args.policies is not None:
        changes["policies"] = tuple(p.strip() for p in args.policies.split(",") if p.strip())
    if changes:
        try:
            settings.config = settings.config.replace(**changes)
        except ConfigError as exc:
            key = str(exc).split(":", 1)[0]
            flag = "--seed" if key == "base_seed" else "--policies"
            raise ConfigFileError(str(exc).split(": ", 1)[-1], key=f"{key} ({flag})") from None
    if args.out_dir is not None:
        settings.out_dir = args.out_dir
    return settings


def cmd_run(args) -> int:
    settings = _settings_from_args(args)
    results = run_experiment(settings.config, jobs=args.jobs)
    out = Path(settings.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    trace_path = out / f"{settings.name}_trace.csv"
    agg_path = out / f"{settings.name}_aggregate.csv"
    write_csv(trace_path, TRACE_COLUMNS, trace_rows(results))
    write_csv(agg_path, AGGREGATE_COLUMNS, aggregate_rows(results))
    print(summary_table(results))
    print(f"trace: {trace_path}")
    print(f"aggregate: {agg_path}")
    return EXIT_OK


def cmd_bound_check(args) -> int:
    settings = _settings_from_args(args)
    config = settings.config
    if not config.bound:
        raise ConfigFileError("bound-check needs 'bound = true' in the config", "bound", settings.lines.get("bound"))
    if "chaining-ucb" not in config.policies:
        raise ConfigFileError("the bound is computed for chaining-ucb only", "policies", settings.lines.get("policies"))
    # the other policies do not affect the chaining runs, so they are skipped
    results = run_experiment(config.replace(policies=("chaining-ucb",)), jobs=args.jobs)
    report = bound_violation_stats(results["chaining-ucb"])
    print(f"runs: {report.runs}")
    print(f"violations: {report.violations}")
    print(f"frequency: {fmt(report.frequency)}")
    print(f"delta: {fmt(config.delta)}")
    return EXIT_OK


def _positive_float(text):
    try:
        val = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a number: {text!r}") from None
    if not val > 0 or math.isinf(val):
        raise argparse.ArgumentTypeError(f"must be a positive finite number, got {text}")
    return val


def _load_points(path) -> np.ndarray:
    try:
        pts = np.loadtxt(path, delimiter=None if "," not in Path(path).read_text() else ",", ndmin=2)
    except (OSError, ValueError) as exc:
        raise ConfigFileError(f"cannot read points from {str(path)!r}: {exc}") from None
    if pts.size == 0:
        raise ConfigFileError(f"no points in {str(path)!r}")
    return pts


def _cover_distance(args) -> np.ndarray:
    if args.graphs is not None:
        try:
            graphs = read_graphs(args.graphs, max_nodes=None)
        except (OSError, ValueError) as exc:
            raise ConfigFileError(f"cannot read graphs from {str(args.graphs)!r}: {exc}") from None
        if not graphs:
            raise ConfigFileError(f"no graphs in {str(args.graphs)!r}")
        if args.metric == "euclidean":
            raise ConfigFileError("graph spaces support --metric kernel only")
        K = kernel_matrix(graphs, KernelSpec("shortest-path"))
        return np.sqrt(np.maximum(2.0 - 2.0 * K, 0.0))
    if args.points is not None:
        pts = _load_points(args.points)
    else:
        pts = uniform_design(args.generate, args.dim, (0.0, 20.0), stream(args.seed, "cover", "design"))
    if args.metric == "euclidean":
        return cdist(pts, pts)
    K = kernel_matrix(pts, KernelSpec("se", args.bandwidth))
    return np.sqrt(np.maximum(2.0 - 2.0 * K, 0.0))


def cmd_cover(args) -> int:
    D = _cover_distance(args)
    dist = DenseDistance(D)
    everything = np.arange(dist.size)
    members = greedy_cover(everything, dist, args.epsilon)
    realized = float(dist.nearest(members).max())
    print(f"points: {dist.size}")
    print(f"epsilon: {fmt(args.epsilon)}")
    print(f"cover size: {len(members)}")
    print(f"members: {' '.join(str(i) for i in members)}")
    print(f"max covering distance: {fmt(realized)}")
    print(f"max degree: {max_degree(everything, dist, args.epsilon)}")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="chainucb", description="GP bandit optimization with chaining-based exploration.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    def experiment_flags(p):
        p.add_argument("--config", required=True, help="flat 'key = value' config file")
        p.add_argument("--seed", type=int, help="override base_seed")
        p.add_argument("--policies", help=f"comma list drawn from {', '.join(POLICIES)}")
        p.add_argument("--out-dir", help="directory for the CSV files")
        p.add_argument("--jobs", type=int, default=1, help="worker processes for independent runs")

    p_run = sub.add_parser("run", help="run an experiment and write CSVs")
    experiment_flags(p_run)
    p_run.set_defaults(func=cmd_run)

    p_bound = sub.add_parser("bound-check", help="report regret-bound violation frequency")
    experiment_flags(p_bound)
    p_bound.set_defaults(func=cmd_bound_check)

    p_cover = sub.add_parser("cover", help="greedy epsilon-cover of a point set")
    src = p_cover.add_mutually_exclusive_group(required=True)
    src.add_argument("--points", help="text file with one point per row")
    src.add_argument("--graphs", help="graph block file")
    src.add_argument("--generate", type=int, metavar="N", help="N stratified uniform points in [0, 20]^dim")
    p_cover.add_argument("--epsilon", type=_positive_float, required=True)
    p_cover.add_argument("--metric", choices=("euclidean", "kernel"), default=None,
                         help="euclidean (default for points) or the prior kernel distance sqrt(2 - 2k)")
    p_cover.add_argument("--bandwidth", type=_positive_float, default=1.0, help="SE bandwidth for --metric kernel")
    p_cover.add_argument("--dim", type=int, default=2)
    p_cover.add_argument("--seed", type=int, default=0)
    p_cover.set_defaults(func=cmd_cover)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.command == "cover":
        if args.metric is None:
            args.metric = "kernel" if args.graphs is not None else "euclidean"
        if args.generate is not None and args.generate < 1:
            parser.error("--generate needs at least one point")
    elif args.jobs < 1:
        parser.error("--jobs must be at least 1")
    try:
        return args.func(args)
    except ConfigFileError as exc:
        print(f"chainucb: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except RunError as exc:
        print(f"chainucb: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
