"""Named experiment presets and the runners that turn them into time series."""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from typing import Callable

import numpy as np

from . import measures
from .dynamics import Diagnostics, SystemConfig, TimeGrid, iter_evolve, steady_state
from .hilbert import partial_trace
from .measures import SuddenDeathReport, TimeSeries
from .wigner import PhaseSpaceGrid, WignerGrid, wigner_grid

N_POPULATIONS = 5
DEFAULT_PUMP_SWEEP = (0.5, 1.0, 1.5, 2.0, 2.5, 3.0)
DEFAULT_KAPPA_SWEEP = (2.0, 4.0, 6.0)
SWEEP_PARAMETERS = {"pump": "pump", "pump_P": "pump", "kappa": "kappa"}

SERIES_LABELS = (
    ("beta", "|beta| from the {|0>,|3>} fit sqrt(p0/(p0+p3))"),
    ("negativity", "negativity of the field-transposed state"),
    ("linear_entropy", "1 - Tr(rho_dot^2), field traced out"),
    ("purity", "Tr(rho^2) of the joint state"),
    *((f"pop_{n}", f"field Fock population p{n}") for n in range(N_POPULATIONS)),
    ("trace_drift", "|Tr rho(t) - Tr rho(0)|"),
)


@dataclass(frozen=True)
class Sweep:
    parameter: str
    values: tuple

    def __post_init__(self):
        if self.parameter not in SWEEP_PARAMETERS:
            raise ValueError(
                f"sweep parameter must be one of {sorted(SWEEP_PARAMETERS)}, got {self.parameter!r}"
            )
        values = tuple(float(v) for v in self.values)
        if not values:
            raise ValueError("sweep needs at least one value")
        if any(v < 0 for v in values):
            raise ValueError("sweep values must be non-negative")
        if any(b <= a for a, b in zip(values, values[1:])):
            raise ValueError("sweep values must be strictly increasing")
        object.__setattr__(self, "parameter", SWEEP_PARAMETERS[self.parameter])
        object.__setattr__(self, "values", values)


@dataclass(frozen=True)
class ScenarioSpec:
    """One run (or one sweep) of the simulator.

    ``grid=None`` and ``snapshots=None`` select the defaults derived from the
    configuration, see :func:`default_grid` and :func:`default_snapshots`.
    """

    name: str
    config: SystemConfig
    grid: TimeGrid | None = None
    snapshots: tuple | None = None
    sweep: Sweep | None = None
    wigner: PhaseSpaceGrid = field(default_factory=PhaseSpaceGrid)

    def resolved_grid(self) -> TimeGrid:
        return self.grid or default_grid(self.config)

    def resolved_snapshots(self) -> tuple:
        grid = self.resolved_grid()
        snaps = self.snapshots if self.snapshots is not None else default_snapshots(self.config, grid)
        snaps = tuple(sorted(float(t) for t in snaps))
        if any(t < grid.t_start or t > grid.t_end for t in snaps):
            raise ValueError(f"snapshot times {snaps} fall outside [{grid.t_start}, {grid.t_end}]")
        return snaps


@dataclass(frozen=True)
class Snapshot:
    time: float
    wigner: WignerGrid
    populations: np.ndarray


@dataclass
class ScenarioResult:
    name: str
    config: SystemConfig
    grid: TimeGrid
    series: dict
    snapshots: dict
    diagnostics: Diagnostics
    final_state: np.ndarray
    sudden_death: SuddenDeathReport | None = None
    steady_state: np.ndarray | None = None
    steady_negativity: float | None = None

    @property
    def times(self) -> np.ndarray:
        return self.series["negativity"].times


def analytic_period(config: SystemConfig) -> float | None:
    """Closed-system recurrence time of the field populations, when one exists.

    A ground-state dot couples only the 3-excitation doublet (Rabi angular
    frequency ``2 g sqrt(3)``); an excited dot couples the 1- and 4-excitation
    doublets, whose frequencies ``2g`` and ``4g`` are commensurate.
    """
    if config.detuning != 0:
        return None
    c, s = math.cos(config.theta), math.sin(config.theta)
    if abs(s) < 1e-12:
        return math.pi / (config.g * math.sqrt(3))
    if abs(c) < 1e-12:
        return math.pi / config.g
    return None


def default_grid(config: SystemConfig) -> TimeGrid:
    """Three recurrence periods for closed runs, ``20 max(1/kappa, 1/P)`` otherwise."""
    if not config.g > 0:
        raise ValueError("scenario grids are scaled by g, which must be positive")
    if config.closed:
        period = analytic_period(config) or math.pi / config.g
        return TimeGrid(t_end=3 * period, dt_sample=0.01 / config.g)
    rates = [r for r in (config.kappa, config.pump) if r > 0]
    return TimeGrid(t_end=20 * max(1 / r for r in rates), dt_sample=0.02 / config.g)


def default_snapshots(config: SystemConfig, grid: TimeGrid) -> tuple:
    period = analytic_period(config) if config.closed else None
    if period is not None and period <= grid.t_end:
        return (grid.t_start, grid.t_start + period / 2, grid.t_start + period)
    return (grid.t_start, grid.t_end)


def observe(rho) -> dict:
    """Scalar observables of one joint state, keyed like :data:`SERIES_LABELS`."""
    rho_field = partial_trace(rho, keep="field")
    pops = measures.fock_populations(rho_field)
    try:
        beta = measures.extract_beta(rho_field)
    except measures.UndefinedFitError:
        beta = math.nan
    out = {
        "beta": beta,
        "negativity": measures.negativity(rho),
        "linear_entropy": measures.linear_entropy(rho, traced_out="field"),
        "purity": measures.purity(rho),
    }
    for n in range(N_POPULATIONS):
        out[f"pop_{n}"] = float(pops[n])
    return out


def run_scenario(spec: ScenarioSpec, with_steady_state: bool | None = None) -> ScenarioResult:
    """Integrate one configuration and collect every series and snapshot.

    Sampling times and snapshot times are merged into one increasing
    schedule so snapshots are taken at their exact times; the series only
    record the regular samples.
    """
    config = spec.config
    grid = spec.resolved_grid()
    snap_times = spec.resolved_snapshots()
    sample_times = grid.times()
    schedule = np.union1d(sample_times, np.asarray(snap_times, dtype=float))
    is_sample = np.isin(schedule, sample_times)
    rho0 = config.initial_state()
    trace0 = np.trace(rho0).real

    labels = [label for label, _ in SERIES_LABELS]
    columns = {label: [] for label in labels}
    snapshots = {}
    diagnostics = Diagnostics()
    rho = rho0
    for k, (t, rho) in enumerate(iter_evolve(rho0, config, schedule, grid.dt_sample, diagnostics)):
        if is_sample[k]:
            for label, value in observe(rho).items():
                columns[label].append(value)
            columns["trace_drift"].append(float(abs(np.trace(rho) - trace0)))
        if t in snap_times:
            rho_field = partial_trace(rho, keep="field")
            snapshots[t] = Snapshot(
                t, wigner_grid(rho_field, spec.wigner), measures.fock_populations(rho_field)
            )

    series = {
        label: TimeSeries(sample_times, np.asarray(columns[label]), label) for label in labels
    }
    result = ScenarioResult(spec.name, config, grid, series, snapshots, diagnostics, rho)
    if not config.closed:
        result.sudden_death = measures.sudden_death_report(series["negativity"])
    if with_steady_state is None:
        with_steady_state = not config.closed
    if with_steady_state:
        result.steady_state = steady_state(config)
        result.steady_negativity = measures.negativity(result.steady_state)
    return result


def _closed(name, theta, overrides):
    config = replace(SystemConfig(theta=theta), **overrides)
    if not config.closed:
        raise ValueError(f"{name} requires pump = kappa = 0")
    if not math.isclose(config.theta, theta, abs_tol=1e-15):
        raise ValueError(f"{name} requires theta = {theta}")
    return ScenarioSpec(name, config)


def closed_ground_spec(**overrides) -> ScenarioSpec:
    return _closed("closed-ground", 0.0, overrides)


def closed_excited_spec(**overrides) -> ScenarioSpec:
    return _closed("closed-excited", math.pi / 2, overrides)


def run_closed_ground(**overrides) -> ScenarioResult:
    """Ideal cavity, dot in |g>: snapshots at 0, T/2, T with T = pi / (g sqrt 3)."""
    return run_scenario(closed_ground_spec(**overrides))


def run_closed_excited(**overrides) -> ScenarioResult:
    """Ideal cavity, dot in |e>: snapshots at 0, T/2, T with T = pi / g."""
    return run_scenario(closed_excited_spec(**overrides))


def run_entanglement_closed(theta: float, **overrides) -> ScenarioResult:
    spec = _closed("entanglement-closed", theta, {**overrides, "theta": theta})
    return run_scenario(spec)


def dissipative_spec(**overrides) -> ScenarioSpec:
    config = replace(SystemConfig(), **overrides)
    if config.closed:
        raise ValueError("dissipative scenario needs pump > 0 or kappa > 0")
    return ScenarioSpec("dissipative", config)


def pump_sweep_spec(values=DEFAULT_PUMP_SWEEP, kappa: float = 6.0, **overrides) -> ScenarioSpec:
    config = replace(SystemConfig(kappa=kappa), **overrides)
    return ScenarioSpec("pump-sweep", config, sweep=Sweep("pump", tuple(values)))


def kappa_sweep_spec(values=DEFAULT_KAPPA_SWEEP, pump: float = 0.5, **overrides) -> ScenarioSpec:
    config = replace(SystemConfig(pump=pump), **overrides)
    return ScenarioSpec("kappa-sweep", config, sweep=Sweep("kappa", tuple(values)))


def run_dissipative_sweep(spec: ScenarioSpec, workers: int = 1) -> list[ScenarioResult]:
    """One dissipative run per sweep value, each with its steady state attached.

    Members are independent and may run on ``workers`` threads; results are
    returned in sweep order.
    """
    if spec.sweep is None:
        raise ValueError("run_dissipative_sweep needs a spec with a sweep")
    members = []
    for value in spec.sweep.values:
        config = replace(spec.config, **{spec.sweep.parameter: value})
        members.append(
            replace(spec, name=f"{spec.name}-{spec.sweep.parameter}={value:g}", config=config, sweep=None)
        )
    for member in members:
        if member.config.closed:
            raise ValueError(f"{member.name} has no dissipative channel")
    run = lambda s: run_scenario(s, with_steady_state=True)  # noqa: E731
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            return list(pool.map(run, members))
    return [run(m) for m in members]


SCENARIOS: dict[str, Callable[..., ScenarioSpec]] = {
    "closed-ground": closed_ground_spec,
    "closed-excited": closed_excited_spec,
    "entanglement-closed": lambda **kw: _closed(
        "entanglement-closed", kw.get("theta", 0.0), kw
    ),
    "dissipative": dissipative_spec,
}
