"""Command-line front end.

Configuration files are UTF-8 ``key = value`` lines with ``#`` comments.
Exit codes: 0 success, 1 usage or I/O error, 2 validation error,
3 invariant violation.
"""

from __future__ import annotations

import argparse
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import __version__, measures, scenarios, selfcheck
from .dynamics import InvariantViolation, SystemConfig, TimeGrid, evolve, steady_state
from .hilbert import partial_trace
from .measures import TimeSeries
from .scenarios import ScenarioResult, ScenarioSpec, Sweep
from .wigner import PhaseSpaceGrid, WignerGrid, wigner_grid

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_INVARIANT = 0, 1, 2, 3

FLOAT_KEYS = ("g", "omega_a", "omega_sigma", "pump", "kappa", "beta", "beta_re", "beta_im",
              "theta", "t_end", "dt_sample", "grid_extent")
INT_KEYS = ("n_max", "grid_points")
TEXT_KEYS = ("scenario", "sweep_param", "sweep_values")
VALID_KEYS = FLOAT_KEYS + INT_KEYS + TEXT_KEYS
META_PREFIX = "meta."

UNITS_NOTE = "time in the inverse units of g (g = {g!r}, so g*t is dimensionless)"


class ConfigError(ValueError):
    def __init__(self, key, message):
        super().__init__(f"{key}: {message}" if key else message)
        self.key = key


class UsageError(Exception):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Everything a configuration file resolves to."""

    scenario: str
    config: SystemConfig
    grid: TimeGrid | None = None
    sweep: Sweep | None = None
    wigner: PhaseSpaceGrid = field(default_factory=PhaseSpaceGrid)

    def spec(self) -> ScenarioSpec:
        return ScenarioSpec(self.scenario, self.config, self.grid, wigner=self.wigner)

    def resolved_grid(self) -> TimeGrid:
        return self.grid or scenarios.default_grid(self.config)


def _number(key, text, kind):
    try:
        return kind(text)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {kind.__name__}") from None


def parse_values(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(";", ",").split(",") if v.strip())


def parse_config_text(text: str) -> RunConfig:
    raw = {}
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(None, f"line {lineno}: expected 'key = value'")
        key, value = (part.strip() for part in line.split("=", 1))
        if key.startswith(META_PREFIX):
            continue
        if key not in VALID_KEYS:
            raise ConfigError(key, f"unknown key; valid keys are {', '.join(VALID_KEYS)}")
        raw[key] = value

    values = {}
    for key, text_value in raw.items():
        if key in FLOAT_KEYS:
            values[key] = _number(key, text_value, float)
        elif key in INT_KEYS:
            values[key] = _number(key, text_value, int)
        else:
            values[key] = text_value

    for key in ("g",):
        if key in values and not values[key] > 0:
            raise ConfigError(key, "must be positive")
    for key in ("pump", "kappa"):
        if key in values and values[key] < 0:
            raise ConfigError(key, "rates must be non-negative")
    if "beta" in values and ("beta_re" in values or "beta_im" in values):
        raise ConfigError("beta", "give either beta or beta_re/beta_im, not both")
    beta = complex(values.pop("beta", values.pop("beta_re", 0.9)), values.pop("beta_im", 0.0))
    if abs(beta) > 1:
        raise ConfigError("beta", f"|beta| = {abs(beta)!r} exceeds 1")

    overrides = {k: values[k] for k in ("g", "omega_a", "omega_sigma", "pump", "kappa", "theta", "n_max")
                 if k in values}
    if "beta_re" in raw or "beta_im" in raw or "beta" in raw:
        overrides["beta"] = beta
    if "n_max" in overrides and overrides["n_max"] < 5:
        raise ConfigError("n_max", "must be at least 5")

    dissipative = overrides.get("pump", 0) > 0 or overrides.get("kappa", 0) > 0
    scenario = values.get("scenario", "dissipative" if dissipative else "closed-ground")
    if scenario not in scenarios.SCENARIOS:
        raise ConfigError("scenario", f"unknown scenario {scenario!r}; choose from {', '.join(scenarios.SCENARIOS)}")
    try:
        config = scenarios.SCENARIOS[scenario](**overrides).config
    except ValueError as exc:
        raise ConfigError("scenario", str(exc)) from None

    grid = None
    if "t_end" in values or "dt_sample" in values:
        default = scenarios.default_grid(config)
        t_end = values.get("t_end", default.t_end)
        dt = values.get("dt_sample", min(default.dt_sample, t_end))
        try:
            grid = TimeGrid(t_end=t_end, dt_sample=dt)
        except ValueError as exc:
            raise ConfigError("t_end" if "t_end" in values else "dt_sample", str(exc)) from None

    sweep = None
    if "sweep_param" in values or "sweep_values" in values:
        if "sweep_param" not in values or "sweep_values" not in values:
            raise ConfigError("sweep_param", "sweep_param and sweep_values must be given together")
        try:
            sweep = Sweep(values["sweep_param"], parse_values(values["sweep_values"]))
        except ValueError as exc:
            raise ConfigError("sweep_values", str(exc)) from None

    extent = values.get("grid_extent", 4.0)
    points = values.get("grid_points", 101)
    try:
        phase_grid = PhaseSpaceGrid.square(extent, points)
    except ValueError as exc:
        raise ConfigError("grid_extent", str(exc)) from None
    return RunConfig(scenario, config, grid, sweep, phase_grid)


def parse_config(path) -> RunConfig:
    """Read a ``key = value`` file; ``None`` gives the all-defaults run."""
    if path is None:
        return parse_config_text("")
    return parse_config_text(Path(path).read_text(encoding="utf-8"))


def fmt(x) -> str:
    """Locale-independent 15-significant-digit decimal."""
    x = float(x)
    if x == 0:
        return "0"
    return format(x, ".15g")


def config_echo(run: RunConfig) -> list[tuple[str, str]]:
    c = run.config
    grid = run.resolved_grid()
    items = [
        ("scenario", run.scenario),
        ("g", repr(c.g)),
        ("omega_a", repr(c.omega_a)),
        ("omega_sigma", repr(c.omega_sigma)),
        ("pump", repr(c.pump)),
        ("kappa", repr(c.kappa)),
        ("beta_re", repr(c.beta.real)),
        ("beta_im", repr(c.beta.imag)),
        ("theta", repr(c.theta)),
        ("n_max", str(c.n_max)),
        ("t_end", repr(grid.t_end)),
        ("dt_sample", repr(grid.dt_sample)),
        ("grid_extent", repr(run.wigner.x_max)),
        ("grid_points", str(run.wigner.n_x)),
    ]
    if run.sweep is not None:
        items += [("sweep_param", run.sweep.parameter),
                  ("sweep_values", ",".join(repr(v) for v in run.sweep.values))]
    return items


def write_manifest(directory, run: RunConfig, wall_time: float, results) -> Path:
    path = Path(directory) / "manifest.txt"
    results = list(results)
    drift = max((r.diagnostics.max_trace_drift for r in results), default=0.0)
    herm = max((r.diagnostics.max_hermiticity for r in results), default=0.0)
    mineig = min((r.diagnostics.min_eigenvalue for r in results), default=math.inf)
    lines = ["# resolved configuration; parse_config() accepts this file as input"]
    lines += [f"{k} = {v}" for k, v in config_echo(run)]
    lines += [
        f"{META_PREFIX}tool_version = {__version__}",
        f"{META_PREFIX}wall_time = {wall_time:.3f}",
        f"{META_PREFIX}max_trace_drift = {fmt(drift)}",
        f"{META_PREFIX}max_hermiticity_residue = {fmt(herm)}",
        f"{META_PREFIX}min_eigenvalue = {fmt(mineig)}",
    ]
    _write(path, "\n".join(lines) + "\n")
    return path


def _write(path: Path, text: str):
    try:
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror or exc}") from exc


def _series_text(series: TimeSeries, description: str, g: float) -> str:
    lines = [f"# {series.label}: {description}", f"# {UNITS_NOTE.format(g=g)}", "time,value"]
    lines += [f"{fmt(t)},{fmt(v)}" for t, v in zip(series.times, series.values)]
    return "\n".join(lines) + "\n"


def write_timeseries(result: ScenarioResult, directory) -> list[Path]:
    """One ``<label>.csv`` per series with columns ``time,value``."""
    directory = Path(directory)
    try:
        directory.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise OSError(f"cannot create {directory}: {exc.strerror or exc}") from exc
    descriptions = dict(scenarios.SERIES_LABELS)
    paths = []
    for label, series in result.series.items():
        path = directory / f"{label}.csv"
        _write(path, _series_text(series, descriptions.get(label, ""), result.config.g))
        paths.append(path)
    return paths


def write_wigner(grid: WignerGrid, path, time_label: str | None = None) -> Path:
    """Rows ``x,p,W`` in row-major order over ``(x, p)``."""
    path = Path(path)
    g = grid.grid
    lines = [
        "# Wigner function W(x + i p) = 2 Tr[D^-1 rho D P]; integrates to pi (no 1/pi prefactor)",
        f"# x in [{fmt(g.x_min)}, {fmt(g.x_max)}] with {g.n_x} points; "
        f"p in [{fmt(g.p_min)}, {fmt(g.p_max)}] with {g.n_p} points",
    ]
    if time_label is not None:
        lines.append(f"# t = {time_label}")
    lines.append("x,p,W")
    xs, ps = g.xs, g.ps
    for i, x in enumerate(xs):
        for j, p in enumerate(ps):
            lines.append(f"{fmt(x)},{fmt(p)},{fmt(grid.values[i, j])}")
    _write(path, "\n".join(lines) + "\n")
    return path


def write_snapshots(result: ScenarioResult, directory) -> list[Path]:
    directory = Path(directory)
    paths = []
    rows = ["# field Fock populations at each snapshot", "index,time," +
            ",".join(f"p{n}" for n in range(result.config.n_max))]
    for k, (t, snap) in enumerate(sorted(result.snapshots.items())):
        paths.append(write_wigner(snap.wigner, directory / f"wigner_{k}.csv", fmt(t)))
        rows.append(f"{k},{fmt(t)}," + ",".join(fmt(p) for p in snap.populations))
    path = directory / "snapshots.csv"
    _write(path, "\n".join(rows) + "\n")
    return paths + [path]


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="qdcavity", description="Three-photon state / quantum-dot cavity simulator")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--config", "-c", help="key = value configuration file")

    p = sub.add_parser("evolve", help="run one scenario and write its series")
    common(p)
    p.add_argument("--scenario", choices=sorted(scenarios.SCENARIOS))
    p.add_argument("--out", "-o", default="out", help="output directory")

    p = sub.add_parser("wigner", help="Wigner grid of a field state")
    common(p)
    src = p.add_mutually_exclusive_group()
    src.add_argument("--time", type=float, default=0.0, help="evolve the configured state to this time")
    src.add_argument("--fock", type=int, help="use the Fock state |n>")
    src.add_argument("--rho", help="field density matrix stored with numpy.save")
    p.add_argument("--out", "-o", default="wigner.csv")

    p = sub.add_parser("sweep", help="dissipative sweep over pump or kappa")
    common(p)
    p.add_argument("--param", choices=sorted(scenarios.SWEEP_PARAMETERS))
    p.add_argument("--values", help="comma separated, strictly increasing")
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", "-o", default="sweep")

    p = sub.add_parser("steady", help="steady-state negativity and populations")
    common(p)

    sub.add_parser("check", help="run the invariant self-test suite")
    return parser


def _load(args) -> RunConfig:
    run = parse_config(args.config)
    if getattr(args, "scenario", None) and args.scenario != run.scenario:
        text = Path(args.config).read_text(encoding="utf-8") if args.config else ""
        run = parse_config_text(text + f"\nscenario = {args.scenario}\n")
    return run


def cmd_evolve(args) -> int:
    run = _load(args)
    start = time.perf_counter()
    result = scenarios.run_scenario(run.spec())
    out = Path(args.out)
    write_timeseries(result, out)
    write_snapshots(result, out)
    write_manifest(out, run, time.perf_counter() - start, [result])
    print(f"{run.scenario}: {len(result.times)} samples written to {out}")
    return EXIT_OK


def cmd_wigner(args) -> int:
    run = _load(args)
    n = run.config.n_max
    label = None
    if args.fock is not None:
        if not 0 <= args.fock < n:
            raise ConfigError("fock", f"must lie in [0, {n - 1}]")
        rho_field = np.zeros((n, n), dtype=complex)
        rho_field[args.fock, args.fock] = 1.0
    elif args.rho is not None:
        rho_field = np.load(args.rho)
    else:
        rho = run.config.initial_state()
        if args.time > 0:
            grid = run.grid or scenarios.default_grid(run.config)
            traj = evolve(rho, run.config, TimeGrid(t_end=args.time, dt_sample=min(grid.dt_sample, args.time)))
            rho = traj.states[-1]
        elif args.time < 0:
            raise ConfigError("time", "must be non-negative")
        rho_field = partial_trace(rho, keep="field")
        label = fmt(args.time)
    path = write_wigner(wigner_grid(rho_field, run.wigner), args.out, label)
    print(f"wrote {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    run = _load(args)
    sweep = run.sweep
    if args.param or args.values:
        if not (args.param and args.values):
            raise UsageError("--param and --values must be given together")
        try:
            sweep = Sweep(args.param, parse_values(args.values))
        except ValueError as exc:
            raise ConfigError("values", str(exc)) from None
    if sweep is None:
        raise UsageError("no sweep given (use --param/--values or sweep_param/sweep_values)")
    run = replace(run, sweep=sweep)
    spec = replace(run.spec(), sweep=sweep)
    start = time.perf_counter()
    try:
        results = scenarios.run_dissipative_sweep(spec, workers=args.workers)
    except ValueError as exc:
        raise ConfigError(sweep.parameter, str(exc)) from None
    out = Path(args.out)
    rows = ["# one row per sweep member; negativity peak refined by parabolic interpolation",
            "parameter,value,revival_count,dead_intervals,max_negativity,t_max_negativity,steady_negativity"]
    for value, result in zip(sweep.values, results):
        member_dir = out / f"{sweep.parameter}={fmt(value)}"
        write_timeseries(result, member_dir)
        write_snapshots(result, member_dir)
        member_run = replace(run, config=result.config, sweep=None, scenario="dissipative")
        write_manifest(member_dir, member_run, time.perf_counter() - start, [result])
        t_peak, peak = measures.refined_peak(result.series["negativity"])
        report = result.sudden_death
        rows.append(",".join([sweep.parameter, fmt(value), str(report.revival_count),
                              str(len(report.dead_intervals)), fmt(peak), fmt(t_peak),
                              fmt(result.steady_negativity)]))
    _write(out / "summary.csv", "\n".join(rows) + "\n")
    write_manifest(out, run, time.perf_counter() - start, results)
    print(f"{len(results)} sweep members written to {out}")
    return EXIT_OK


def cmd_steady(args) -> int:
    run = _load(args)
    if run.config.closed:
        raise ConfigError("pump", "steady state needs pump > 0 or kappa > 0")
    rho = steady_state(run.config)
    qubit = partial_trace(rho, keep="qubit")
    pops = measures.fock_populations(partial_trace(rho, keep="field"))
    print(f"negativity = {fmt(measures.negativity(rho))}")
    print(f"linear_entropy = {fmt(measures.linear_entropy(rho))}")
    print(f"excited_population = {fmt(qubit[1, 1].real)}")
    for n, p in enumerate(pops):
        print(f"p{n} = {fmt(p)}")
    return EXIT_OK


def cmd_check(args) -> int:
    results = selfcheck.run_checks()
    for r in results:
        print(f"[{'PASS' if r.ok else 'FAIL'}] {r.name}: {r.detail}")
    return EXIT_OK if all(r.ok for r in results) else EXIT_INVARIANT


COMMANDS = {"evolve": cmd_evolve, "wigner": cmd_wigner, "sweep": cmd_sweep,
            "steady": cmd_steady, "check": cmd_check}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except InvariantViolation as exc:
        print(f"invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
