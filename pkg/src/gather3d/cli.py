"""Command-line front end.

Three subcommands: `run` executes one simulation from a config file and
writes a line-delimited trace, `sweep` runs a size grid and writes a CSV
with an exponent fit, `check` replays property checkers over a stored
trace.  Exit codes are a stable contract: 0 gathered/pass, 1 usage or
parse error, 2 horizon hit, 3 property violation.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import configparser
import dataclasses
import os
import re
import sys
from dataclasses import dataclass

import numpy as np

from . import analysis, generators, geometry, strategies, swarm, tracefile

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_HORIZON = 2
EXIT_VIOLATION = 3

GENERATOR_KINDS = ("circle", "line", "random-ball", "grid", "coplanar-embed")
CHECKER_NAMES = (
    "connectivity",
    "contracting",
    "tangential-normal",
    "ell-monotonic",
    "ell-decay",
)
DEFAULT_DIRECTIONS = 32
DEFAULT_DT = 1e-3
DEFAULT_MAX_ROUNDS = 100000
DEFAULT_MAX_TIME = 1000.0

# Keys accepted per config section; anything else is a typo worth rejecting.
_KNOWN_KEYS = {
    "generator": {
        "kind", "n", "seed", "spacing", "ball_radius", "points2d", "normal", "offset",
    },
    "strategy": {"name"},
    "engine": {"kind", "dt", "max_rounds", "max_time", "gather_tol"},
    "checkers": {"directions", *CHECKER_NAMES},
    "output": {"trace", "ell_directions"},
    "sweep": {"sizes", "csv"},
}

_BOOLEAN_STATES = {
    "1": True, "yes": True, "true": True, "on": True,
    "0": False, "no": False, "false": False, "off": False,
}


class ConfigError(Exception):
    """Config file problem; the message already carries path:line context."""


@dataclass(frozen=True)
class GeneratorSpec:
    """Initial-configuration recipe as written in the config file."""

    kind: str
    n: int = 0
    seed: int = 0
    spacing: float = 1.0
    ball_radius: float = 2.0
    points2d: tuple[tuple[float, float], ...] | None = None
    normal: tuple[float, float, float] = (0.0, 0.0, 1.0)
    offset: tuple[float, float, float] = (0.0, 0.0, 0.0)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one run needs, parsed and validated."""

    generator: GeneratorSpec
    strategy: str
    engine_kind: str
    dt: float
    max_rounds: int
    max_time: float
    gather_tol: float
    checkers: tuple[str, ...]
    directions: int
    trace_path: str
    ell_directions: tuple[tuple[float, float, float], ...] | None
    sweep_sizes: tuple[int, ...] | None
    csv_path: str
    echo: dict


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def _find_line(lines: list[str], section: str, key: str | None = None) -> int | None:
    """Best-effort line number of a section header or of a key inside it."""
    inside = False
    for idx, raw in enumerate(lines, start=1):
        stripped = raw.strip()
        if stripped.startswith("[") and stripped.endswith("]"):
            inside = stripped[1:-1].strip() == section
            if inside and key is None:
                return idx
            continue
        if inside and key is not None:
            m = re.match(r"\s*([^=:]+?)\s*[=:]", raw)
            if m and m.group(1).strip().lower() == key.lower():
                return idx
    return None


class _Loader:
    """Reads one INI-style config file and reports errors with line numbers."""

    def __init__(self, path: str):
        self.path = path
        try:
            with open(path) as fh:
                text = fh.read()
        except OSError as exc:
            raise ConfigError(f"{path}: cannot read config: {exc}") from exc
        self.lines = text.splitlines()
        parser = configparser.ConfigParser(interpolation=None)
        try:
            parser.read_string(text, source=path)
        except configparser.Error as exc:
            raise ConfigError(str(exc)) from exc
        self.parser = parser
        for section in parser.sections():
            if section not in _KNOWN_KEYS:
                raise ConfigError(
                    f"{self._where(section)}: unknown section [{section}]"
                )
            for key in parser.options(section):
                if key not in _KNOWN_KEYS[section]:
                    raise ConfigError(
                        f"{self._where(section, key)}: unknown key {key!r} "
                        f"in section [{section}]"
                    )

    def _where(self, section: str, key: str | None = None) -> str:
        line = _find_line(self.lines, section, key)
        return f"{self.path}:{line}" if line else self.path

    def _fail(self, section: str, key: str, detail: str):
        raise ConfigError(f"{self._where(section, key)}: [{section}] {key}: {detail}")

    def get(self, section: str, key: str, cast, default=None, required=False):
        if not self.parser.has_option(section, key):
            if required:
                where = self._where(section)
                raise ConfigError(
                    f"{where}: section [{section}] is missing required key {key!r}"
                )
            return default
        raw = self.parser.get(section, key).strip()
        try:
            return cast(raw)
        except ConfigError:
            raise
        except Exception as exc:
            self._fail(section, key, f"bad value {raw!r} ({exc})")

    def echo(self) -> dict:
        return {
            section: dict(self.parser.items(section))
            for section in self.parser.sections()
        }


def _cast_bool(raw: str) -> bool:
    state = _BOOLEAN_STATES.get(raw.lower())
    if state is None:
        raise ValueError("expected a boolean (true/false/yes/no/on/off/1/0)")
    return state


def _cast_vec3(raw: str) -> tuple[float, float, float]:
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    if len(parts) != 3:
        raise ValueError("expected three comma-separated numbers")
    x, y, z = (float(p) for p in parts)
    return (x, y, z)


def _cast_points2d(raw: str) -> tuple[tuple[float, float], ...]:
    pairs = [p for p in re.split(r"[;\s]+", raw.strip()) if p]
    out = []
    for pair in pairs:
        parts = pair.split(",")
        if len(parts) != 2:
            raise ValueError(f"expected 'a,b' pairs, got {pair!r}")
        out.append((float(parts[0]), float(parts[1])))
    if not out:
        raise ValueError("expected at least one 'a,b' pair")
    return tuple(out)


def _cast_sizes(raw: str) -> tuple[int, ...]:
    parts = [p for p in re.split(r"[,\s]+", raw.strip()) if p]
    sizes = tuple(int(p) for p in parts)
    if not sizes:
        raise ValueError("expected at least one size")
    if any(s < 1 for s in sizes):
        raise ValueError("sizes must be >= 1")
    return sizes


def _cast_directions(raw: str) -> tuple[tuple[float, float, float], ...]:
    groups = [g for g in re.split(r"[;\s]+", raw.strip()) if g]
    dirs = tuple(_cast_vec3(g) for g in groups)
    if not dirs:
        raise ValueError("expected at least one x,y,z direction")
    return dirs


def load_config(
    path: str, seed_override: int | None = None, dt_override: float | None = None
) -> ExperimentConfig:
    """Parse and validate a config file into an ExperimentConfig.

    Raises ConfigError with a path:line message on any problem, including
    the strategy/engine compatibility rule.
    """
    loader = _Loader(path)

    kind = loader.get("generator", "kind", str, required=True)
    if kind not in GENERATOR_KINDS:
        loader._fail(
            "generator", "kind", f"must be one of {', '.join(GENERATOR_KINDS)}"
        )
    points2d = loader.get("generator", "points2d", _cast_points2d)
    if kind == "coplanar-embed":
        if points2d is None:
            loader._fail("generator", "kind", "coplanar-embed needs points2d")
        n_default = len(points2d)
    else:
        n_default = None
    n = loader.get("generator", "n", int, default=n_default, required=kind != "coplanar-embed")
    if n is None or n < 1:
        loader._fail("generator", "n", "robot count must be >= 1")
    if points2d is not None and kind == "coplanar-embed" and n != len(points2d):
        loader._fail("generator", "n", f"does not match the {len(points2d)} points2d")
    seed = loader.get("generator", "seed", int, default=0)
    if seed_override is not None:
        seed = seed_override
    gen = GeneratorSpec(
        kind=kind,
        n=int(n),
        seed=int(seed),
        spacing=loader.get("generator", "spacing", float, default=1.0),
        ball_radius=loader.get("generator", "ball_radius", float, default=2.0),
        points2d=points2d,
        normal=loader.get("generator", "normal", _cast_vec3, default=(0.0, 0.0, 1.0)),
        offset=loader.get("generator", "offset", _cast_vec3, default=(0.0, 0.0, 0.0)),
    )

    strategy = loader.get("strategy", "name", str, required=True)
    if strategy not in strategies.STRATEGIES:
        loader._fail(
            "strategy", "name",
            f"must be one of {', '.join(sorted(strategies.STRATEGIES))}",
        )
    natural_kind = strategies.STRATEGIES[strategy].kind
    engine_kind = loader.get("engine", "kind", str, default=natural_kind)
    if engine_kind not in ("fsync", "continuous"):
        loader._fail("engine", "kind", "must be fsync or continuous")
    if engine_kind != natural_kind:
        where = loader._where("engine", "kind")
        raise ConfigError(
            f"{where}: strategy {strategy!r} requires the {natural_kind} engine, "
            f"not {engine_kind!r}"
        )

    dt = loader.get("engine", "dt", float, default=DEFAULT_DT)
    if dt_override is not None:
        dt = dt_override
    if not dt > 0.0:
        loader._fail("engine", "dt", "must be positive")
    max_rounds = loader.get("engine", "max_rounds", int, default=DEFAULT_MAX_ROUNDS)
    if max_rounds < 1:
        loader._fail("engine", "max_rounds", "must be >= 1")
    max_time = loader.get("engine", "max_time", float, default=DEFAULT_MAX_TIME)
    if not max_time > 0.0:
        loader._fail("engine", "max_time", "must be positive")
    default_tol = 0.0 if engine_kind == "fsync" else 1e-3
    gather_tol = loader.get("engine", "gather_tol", float, default=default_tol)
    if gather_tol < 0.0:
        loader._fail("engine", "gather_tol", "must be >= 0")

    checkers = tuple(
        name for name in CHECKER_NAMES
        if loader.get("checkers", name, _cast_bool, default=False)
    )
    directions = loader.get("checkers", "directions", int, default=DEFAULT_DIRECTIONS)
    if directions < 1:
        loader._fail("checkers", "directions", "must be >= 1")

    return ExperimentConfig(
        generator=gen,
        strategy=strategy,
        engine_kind=engine_kind,
        dt=float(dt),
        max_rounds=int(max_rounds),
        max_time=float(max_time),
        gather_tol=float(gather_tol),
        checkers=checkers,
        directions=int(directions),
        trace_path=loader.get("output", "trace", str, default="trace.jsonl"),
        ell_directions=loader.get("output", "ell_directions", _cast_directions),
        sweep_sizes=loader.get("sweep", "sizes", _cast_sizes),
        csv_path=loader.get("sweep", "csv", str, default="sweep.csv"),
        echo=loader.echo(),
    )


# ---------------------------------------------------------------------------
# running
# ---------------------------------------------------------------------------


def build_configuration(spec: GeneratorSpec) -> swarm.Configuration:
    """Materialize the initial configuration a GeneratorSpec describes."""
    if spec.kind == "circle":
        return generators.circle_config(spec.n)
    if spec.kind == "line":
        return generators.line_config(spec.n, spec.spacing)
    if spec.kind == "random-ball":
        return generators.random_connected(spec.n, spec.seed, spec.ball_radius)
    if spec.kind == "grid":
        return generators.grid_config(spec.n, spec.spacing)
    if spec.kind == "coplanar-embed":
        basis = geometry.plane_basis(np.array(spec.normal))
        return generators.coplanar_embed(
            np.array(spec.points2d, dtype=float), basis, np.array(spec.offset)
        )
    raise ValueError(f"unknown generator kind {spec.kind!r}")


def run_single(exp: ExperimentConfig) -> tuple[analysis.Trace, list[analysis.CheckReport]]:
    """Run one experiment and its requested checkers."""
    config = build_configuration(exp.generator)
    strategy = strategies.STRATEGIES[exp.strategy]()
    if exp.engine_kind == "fsync":
        trace = strategies.run_fsync(
            config, strategy, max_rounds=exp.max_rounds, gather_tol=exp.gather_tol
        )
    else:
        trace = strategies.integrate(
            config, strategy, dt=exp.dt, max_time=exp.max_time,
            gather_tol=exp.gather_tol,
        )
    reports = run_checkers(trace, exp.checkers, exp.directions)
    return trace, reports


def _fold_reports(name: str, reports: list[analysis.CheckReport]) -> analysis.CheckReport:
    """Combine per-direction reports into one; worst margin wins."""
    worst = max(r.worst_margin for r in reports)
    firsts = [r.first_violation_time for r in reports if r.first_violation_time is not None]
    details: list[str] = []
    for r in reports:
        details.extend(r.details)
    return analysis.CheckReport(
        name=name,
        passed=all(r.passed for r in reports),
        tolerance=0.0,
        worst_margin=worst,
        first_violation_time=min(firsts) if firsts else None,
        details=tuple(details[:8]),
    )


def run_checkers(
    trace: analysis.Trace, names, count: int = DEFAULT_DIRECTIONS
) -> list[analysis.CheckReport]:
    """Dispatch checker names onto a trace.

    Raises ValueError when a requested checker cannot run on this trace
    (wrong engine kind, or the trace records no velocities).
    """
    reports = []
    for name in names:
        if name == "connectivity":
            reports.append(analysis.check_connectivity(trace))
        elif name == "contracting":
            reports.append(analysis.check_contracting(trace))
        elif name == "tangential-normal":
            reports.append(analysis.check_tangential_normal(trace))
        elif name == "ell-monotonic":
            dirs = geometry.hemisphere_directions(count)
            reports.append(analysis.check_length_monotonic(trace, dirs))
        elif name == "ell-decay":
            dirs = geometry.hemisphere_directions(count)
            per_dir = [analysis.check_length_decay(trace, d) for d in dirs]
            reports.append(_fold_reports("ell-decay", per_dir))
        else:
            raise ValueError(
                f"unknown property {name!r}; choose from {', '.join(CHECKER_NAMES)}"
            )
    return reports


def format_report(report: analysis.CheckReport) -> str:
    """One structured text block per report, machine-greppable."""
    verdict = "PASS" if report.passed else "FAIL"
    line = (
        f"check {report.name}: {verdict} "
        f"worst_margin={report.worst_margin!r} tolerance={report.tolerance!r}"
    )
    if report.first_violation_time is not None:
        line += f" first_violation_time={report.first_violation_time!r}"
    for detail in report.details:
        line += f"\n  detail: {detail}"
    return line


def _resolve(path: str, out_dir: str | None) -> str:
    if out_dir and not os.path.isabs(path):
        path = os.path.join(out_dir, path)
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    return path


def _say(quiet: bool, *parts):
    if not quiet:
        print(*parts)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------


def cmd_run(args) -> int:
    try:
        exp = load_config(args.config, args.seed, args.dt)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        trace, reports = run_single(exp)
    except (ValueError, RuntimeError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    trace_path = _resolve(exp.trace_path, args.out)
    ell_dirs = None
    if exp.ell_directions:
        ell_dirs = np.array(exp.ell_directions, dtype=float)
    tracefile.write_trace(
        trace_path, trace, config_echo=exp.echo,
        ell_directions=ell_dirs, reports=reports,
    )

    unit = "rounds" if trace.kind == "fsync" else "time"
    amount = int(round(trace.elapsed)) if trace.kind == "fsync" else trace.elapsed
    _say(args.quiet, f"run: strategy={exp.strategy} n={exp.generator.n} "
         f"delta={trace.initial_diameter!r}")
    _say(args.quiet, f"gathered: {'yes' if trace.gathered else 'no'} "
         f"{unit}={amount!r} live={trace.final_config.n_live}")
    for report in reports:
        _say(args.quiet, format_report(report))
    _say(args.quiet, f"trace: {trace_path}")

    if any(not r.passed for r in reports):
        return EXIT_VIOLATION
    return EXIT_OK if trace.gathered else EXIT_HORIZON


def _sweep_case(payload) -> dict:
    """One sweep run; module-level so process pools can pickle it."""
    exp, n, seed = payload
    spec = dataclasses.replace(exp.generator, n=n, seed=seed)
    sized = dataclasses.replace(exp, generator=spec, checkers=())
    trace, _ = run_single(sized)
    if trace.kind == "fsync":
        value = int(round(trace.elapsed)) if trace.gathered else None
        dt = 1.0
    else:
        value = trace.elapsed if trace.gathered else None
        dt = trace.dt
    return {
        "n": n,
        "delta": trace.initial_diameter,
        "strategy": exp.strategy,
        "dt": dt,
        "value": value,
    }


def _worker_count(n_jobs: int) -> int:
    raw = os.environ.get("GATHER3D_THREADS", "")
    if raw.strip():
        try:
            cap = int(raw)
        except ValueError:
            raise ConfigError(
                f"GATHER3D_THREADS must be an integer, got {raw!r}"
            ) from None
        if cap < 1:
            raise ConfigError("GATHER3D_THREADS must be >= 1")
    else:
        cap = os.cpu_count() or 1
    return max(1, min(cap, n_jobs))


def cmd_sweep(args) -> int:
    try:
        exp = load_config(args.config, args.seed, args.dt)
        if not exp.sweep_sizes:
            raise ConfigError(
                f"{args.config}: sweep needs a [sweep] section with a sizes list"
            )
        workers = _worker_count(len(exp.sweep_sizes))
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE

    payloads = [
        (exp, n, exp.generator.seed + idx)
        for idx, n in enumerate(exp.sweep_sizes)
    ]
    try:
        if workers == 1:
            rows = [_sweep_case(p) for p in payloads]
        else:
            with concurrent.futures.ProcessPoolExecutor(max_workers=workers) as pool:
                rows = list(pool.map(_sweep_case, payloads))
    except (ValueError, RuntimeError) as exc:
        print(f"error: {args.config}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    lines = ["n,delta,strategy,dt,gathering_time_or_rounds"]
    for row in rows:
        value = "" if row["value"] is None else repr(row["value"])
        lines.append(
            f"{row['n']},{row['delta']!r},{row['strategy']},{row['dt']!r},{value}"
        )
    gathered = [r for r in rows if r["value"] is not None]
    fit_line = None
    if len({r["n"] for r in gathered}) >= 3:
        exponent, r2 = analysis.scaling_fit(
            [r["n"] for r in gathered], [float(r["value"]) for r in gathered]
        )
        fit_line = f"# fit: exponent={exponent:.6g} r_squared={r2:.6g} points={len(gathered)}"
        lines.append(fit_line)

    csv_path = _resolve(exp.csv_path, args.out)
    tmp = csv_path + ".tmp"
    with open(tmp, "w") as fh:
        fh.write("\n".join(lines) + "\n")
    os.replace(tmp, csv_path)

    _say(args.quiet, f"sweep: {len(rows)} sizes -> {csv_path}")
    if fit_line:
        _say(args.quiet, fit_line)
    if any(r["value"] is None for r in rows):
        return EXIT_HORIZON
    return EXIT_OK


def cmd_check(args) -> int:
    try:
        trace, _header, _summary = tracefile.read_trace(args.trace)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    names = list(dict.fromkeys(args.properties))
    try:
        reports = run_checkers(trace, names)
    except ValueError as exc:
        print(f"error: {args.trace}: {exc}", file=sys.stderr)
        return EXIT_USAGE

    blocks = [format_report(r) for r in reports]
    for block in blocks:
        _say(args.quiet, block)
    if args.out:
        stem = os.path.splitext(os.path.basename(args.trace))[0]
        report_path = _resolve(stem + ".checks.txt", args.out)
        with open(report_path, "w") as fh:
            fh.write("\n".join(blocks) + "\n")
        _say(args.quiet, f"report: {report_path}")

    if any(not r.passed for r in reports):
        return EXIT_VIOLATION
    return EXIT_OK


# ---------------------------------------------------------------------------
# entry point
# ---------------------------------------------------------------------------


def _add_common(sub):
    sub.add_argument("--out", metavar="DIR", help="directory for output files")
    sub.add_argument("--seed", type=int, metavar="N", help="override the config seed")
    sub.add_argument("--dt", type=float, metavar="F", help="override the engine dt")
    sub.add_argument("--quiet", action="store_true", help="suppress progress output")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="gather3d",
        description="Simulate and check limited-visibility gathering strategies in 3D.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run one simulation and write its trace")
    p_run.add_argument("--config", required=True, metavar="PATH")
    _add_common(p_run)
    p_run.set_defaults(func=cmd_run)

    p_sweep = sub.add_parser("sweep", help="run a size grid and write a CSV")
    p_sweep.add_argument("--config", required=True, metavar="PATH")
    _add_common(p_sweep)
    p_sweep.set_defaults(func=cmd_sweep)

    p_check = sub.add_parser("check", help="replay property checkers over a trace")
    p_check.add_argument("trace", metavar="TRACE")
    p_check.add_argument(
        "properties", nargs="+", metavar="PROPERTY",
        help=f"one or more of: {', '.join(CHECKER_NAMES)}",
    )
    _add_common(p_check)
    p_check.set_defaults(func=cmd_check)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    sys.exit(main())
