"""Jaynes-Cummings dynamics with incoherent qubit pumping and cavity leakage.

The master equation integrated here is

    d(rho)/dt = i[rho, H] + P/2 (2 s+ rho s - s s+ rho - rho s s+)
                         + kappa/2 (2 a rho a+ - a+a rho - rho a+a)

with ``H = w_a a+a + w_s s+s + g (a+ s + a s+)`` and ``s = |g><e|``.

Time integration is classical fixed-step RK4.  For a linear, autonomous
generator one RK4 step is exactly multiplication by the degree-4 Taylor
polynomial of ``h L``, so the polynomial is formed once and raised to the
number of steps per sample.  ``L`` is block diagonal in the difference of
excitation numbers between the row and column of ``rho``; each block is
propagated on its own and blocks that start empty stay empty.
Trace is never renormalised; drift is reported.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Iterator, Sequence

import numpy as np

from . import hilbert
from .hilbert import FockCutoff, StateDiagnostics

# invariant violations beyond this abort an evolution
HARD_TOL = 1e-6

MAX_STEPS_PER_INTERVAL = 10**8


class InvariantViolation(RuntimeError):
    """A sampled state left the density-matrix manifold beyond ``HARD_TOL``."""


class StepSizeError(RuntimeError):
    """The integrator step collapsed below a representable size."""


class DegenerateSteadyStateWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SystemConfig:
    """Physical and truncation parameters.

    Frequencies and rates share one (arbitrary) inverse-time unit; the
    defaults work in the frame rotating at the common bare frequency, which
    leaves every reported observable unchanged at resonance.
    """

    g: float = 10.0
    omega_a: float = 0.0
    omega_sigma: float = 0.0
    pump: float = 0.0
    kappa: float = 0.0
    n_max: int = 15
    theta: float = 0.0
    beta: complex = 0.9 + 0j

    def __post_init__(self):
        if self.g < 0:
            raise ValueError(f"g must be non-negative (got {self.g!r})")
        if self.pump < 0:
            raise ValueError(f"pump must be non-negative (got {self.pump!r})")
        if self.kappa < 0:
            raise ValueError(f"kappa must be non-negative (got {self.kappa!r})")
        if abs(complex(self.beta)) > 1.0:
            raise ValueError(f"|beta| must be <= 1 (got {self.beta!r})")
        FockCutoff(self.n_max)
        object.__setattr__(self, "beta", complex(self.beta))

    @property
    def detuning(self) -> float:
        return self.omega_a - self.omega_sigma

    @property
    def cutoff(self) -> FockCutoff:
        return FockCutoff(self.n_max)

    @property
    def dim(self) -> int:
        return 2 * self.n_max

    @property
    def closed(self) -> bool:
        return self.pump == 0 and self.kappa == 0

    def initial_state(self) -> np.ndarray:
        return hilbert.initial_condition(self.theta, self.beta, self.cutoff)


@dataclass(frozen=True)
class TimeGrid:
    t_end: float
    dt_sample: float
    t_start: float = 0.0

    def __post_init__(self):
        if not self.t_end > self.t_start:
            raise ValueError("t_end must exceed t_start")
        if not self.dt_sample > 0:
            raise ValueError("dt_sample must be positive")
        if self.dt_sample > self.t_end - self.t_start:
            raise ValueError("dt_sample must not exceed the grid span")

    def times(self) -> np.ndarray:
        """Sample times ``t_start + k dt`` plus ``t_end`` itself when off-grid."""
        span = self.t_end - self.t_start
        count = int(math.floor(span / self.dt_sample * (1 + 1e-12)))
        t = self.t_start + self.dt_sample * np.arange(count + 1)
        if span - count * self.dt_sample > 1e-9 * self.dt_sample:
            t = np.append(t, self.t_end)
        else:
            t[-1] = self.t_end
        return t


@dataclass
class Diagnostics:
    """Worst invariant residues seen over a set of sampled states."""

    max_trace_drift: float = 0.0
    max_hermiticity: float = 0.0
    min_eigenvalue: float = math.inf

    def update(self, diag: StateDiagnostics, trace_drift: float):
        self.max_trace_drift = max(self.max_trace_drift, trace_drift)
        self.max_hermiticity = max(self.max_hermiticity, diag.hermiticity)
        self.min_eigenvalue = min(self.min_eigenvalue, diag.min_eigenvalue)


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray
    diagnostics: Diagnostics = field(default_factory=Diagnostics)

    def __len__(self):
        return len(self.times)


def hamiltonian(config: SystemConfig) -> np.ndarray:
    a, s = hilbert.joint_operators(config.cutoff)
    ad, sd = a.conj().T, s.conj().T
    return (
        config.omega_a * (ad @ a)
        + config.omega_sigma * (sd @ s)
        + config.g * (ad @ s + a @ sd)
    )


def _jump_operators(config: SystemConfig):
    a, s = hilbert.joint_operators(config.cutoff)
    jumps = []
    if config.pump:
        jumps.append((config.pump, s.conj().T))
    if config.kappa:
        jumps.append((config.kappa, a))
    return jumps


class _Generator:
    """Right-hand side in matrix form, with operators built once."""

    def __init__(self, config: SystemConfig):
        self.H = hamiltonian(config)
        self.jumps = [(rate, c, c.conj().T) for rate, c in _jump_operators(config)]
        decay = sum(
            (rate * (cd @ c) for rate, c, cd in self.jumps),
            np.zeros_like(self.H),
        )
        # H_eff = H - (i/2) sum r c+c collects the anticommutator terms
        self.H_eff = self.H - 0.5j * decay

    def __call__(self, rho: np.ndarray) -> np.ndarray:
        out = -1j * (self.H_eff @ rho - rho @ self.H_eff.conj().T)
        for rate, c, cd in self.jumps:
            out += rate * (c @ rho @ cd)
        return out


def lindblad_rhs(rho, config: SystemConfig) -> np.ndarray:
    """``d(rho)/dt`` for the pumped, leaky Jaynes-Cummings master equation."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (config.dim, config.dim):
        raise ValueError(f"rho has shape {rho.shape}, expected {(config.dim,) * 2}")
    return _Generator(config)(rho)


def liouvillian(config: SystemConfig) -> np.ndarray:
    """Superoperator acting on column-stacked ``vec(rho)``.

    Uses ``vec(A X B) = (B^T kron A) vec(X)``.
    """
    H = hamiltonian(config)
    eye = np.eye(config.dim, dtype=complex)
    L = 1j * (np.kron(H.T, eye) - np.kron(eye, H))
    for rate, c in _jump_operators(config):
        cdc = c.conj().T @ c
        L += rate * (
            np.kron(c.conj(), c) - 0.5 * np.kron(eye, cdc) - 0.5 * np.kron(cdc.T, eye)
        )
    return L


def vec(rho: np.ndarray) -> np.ndarray:
    return np.asarray(rho).reshape(-1, order="F")


def unvec(v: np.ndarray, dim: int) -> np.ndarray:
    return np.asarray(v).reshape(dim, dim, order="F")


def rk4_step(f, y, h):
    k1 = f(y)
    k2 = f(y + 0.5 * h * k1)
    k3 = f(y + 0.5 * h * k2)
    k4 = f(y + h * k3)
    return y + (h / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)


def max_step(config: SystemConfig, dt_sample: float) -> float:
    """Upper bound on the internal RK4 step.

    The coherent scale is the largest of ``g`` and the bare frequencies, so
    lab-frame runs are resolved as finely as rotating-frame ones.
    """
    coherent = max(config.g, abs(config.omega_a), abs(config.omega_sigma), 1e-30)
    rate = max(config.kappa, config.pump, 1e-30)
    return min(dt_sample, 0.001 / coherent, 0.1 / rate)


def _steps_for(interval: float, h_max: float) -> int:
    steps = max(1, math.ceil(interval / h_max * (1 - 1e-12)))
    if steps > MAX_STEPS_PER_INTERVAL or interval / steps <= 0:
        raise StepSizeError(
            f"step size underflow: {steps} steps needed for an interval of {interval!r}"
        )
    return steps


def excitation_numbers(n_max: int) -> np.ndarray:
    """Total excitation ``q + n`` of each joint basis state."""
    return np.add.outer(np.arange(2), np.arange(n_max)).ravel()


def coherence_sectors(n_max: int) -> list[np.ndarray]:
    """Flat (row-major) indices of ``rho`` grouped by ``N(row) - N(col)``.

    The Hamiltonian conserves the excitation number and both jump operators
    shift it equally on the two sides of ``rho``, so the generator never mixes
    entries from different groups.
    """
    N = excitation_numbers(n_max)
    diff = np.subtract.outer(N, N).ravel()
    return [np.flatnonzero(diff == k) for k in np.unique(diff)]


class _Integrator:
    """Fixed-step RK4, applied sector by sector as a precomputed matrix power."""

    def __init__(self, config: SystemConfig, h_max: float, active=None):
        self.dim = config.dim
        self.h_max = h_max
        self.rhs = _Generator(config)
        sectors = coherence_sectors(config.n_max)
        if active is not None:
            flat = np.asarray(active).ravel()
            sectors = [idx for idx in sectors if np.any(flat[idx] != 0)]
        self.sectors = sectors
        self.blocks = [self._sector_generator(idx) for idx in sectors]
        self._cache = {}

    def _sector_generator(self, idx: np.ndarray) -> np.ndarray:
        block = np.empty((idx.size, idx.size), dtype=complex)
        unit = np.zeros((self.dim, self.dim), dtype=complex)
        for col, flat in enumerate(idx):
            unit.flat[flat] = 1.0
            block[:, col] = self.rhs(unit).ravel()[idx]
            unit.flat[flat] = 0.0
        return block

    def _propagators(self, interval: float, steps: int) -> list[np.ndarray]:
        key = (steps, round(interval, 12))
        props = self._cache.get(key)
        if props is None:
            h = interval / steps
            props = []
            for L in self.blocks:
                hL = h * L
                eye = np.eye(L.shape[0], dtype=complex)
                # one RK4 step of a linear ODE: sum_{k<=4} (hL)^k / k!
                step = eye + hL @ (eye + hL @ (eye + hL @ (eye + hL / 4) / 3) / 2)
                props.append(np.linalg.matrix_power(step, steps))
            self._cache[key] = props
        return props

    def advance(self, rho: np.ndarray, interval: float) -> np.ndarray:
        steps = _steps_for(interval, self.h_max)
        flat = rho.ravel()
        out = np.zeros_like(flat)
        for idx, prop in zip(self.sectors, self._propagators(interval, steps)):
            out[idx] = prop @ flat[idx]
        return out.reshape(self.dim, self.dim)

    def step_directly(self, rho: np.ndarray, interval: float) -> np.ndarray:
        """Same scheme stepped on the full matrix; reference path for tests."""
        steps = _steps_for(interval, self.h_max)
        h = interval / steps
        for _ in range(steps):
            rho = rk4_step(self.rhs, rho, h)
        return rho


def _check(rho, trace0, t, diagnostics: Diagnostics):
    diag = hilbert.diagnose(rho)
    drift = float(abs(np.trace(rho) - trace0))
    diagnostics.update(diag, drift)
    worst = max(drift, diag.hermiticity, -diag.min_eigenvalue)
    if worst > HARD_TOL:
        raise InvariantViolation(
            f"t={t!r}: trace drift {drift:.3e}, hermiticity {diag.hermiticity:.3e}, "
            f"min eigenvalue {diag.min_eigenvalue:.3e} (hard tolerance {HARD_TOL:g})"
        )


def iter_evolve(
    rho0,
    config: SystemConfig,
    times: Sequence[float],
    dt_sample: float | None = None,
    diagnostics: Diagnostics | None = None,
) -> Iterator[tuple[float, np.ndarray]]:
    """Yield ``(t, rho(t))`` at each of ``times``; ``rho0`` is the state at ``times[0]``.

    Every yielded state is checked against the density-matrix invariants and
    the worst residues are accumulated into ``diagnostics`` when given.
    """
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0:
        raise ValueError("times must be a non-empty 1-D sequence")
    if np.any(np.diff(times) <= 0):
        raise ValueError("times must be strictly increasing")
    rho = np.array(rho0, dtype=complex)
    if rho.shape != (config.dim, config.dim):
        raise ValueError(f"rho0 has shape {rho.shape}, expected {(config.dim,) * 2}")
    if dt_sample is None:
        dt_sample = float(np.max(np.diff(times))) if times.size > 1 else 1.0
    diagnostics = diagnostics if diagnostics is not None else Diagnostics()
    integrator = _Integrator(config, max_step(config, dt_sample), active=rho)
    trace0 = np.trace(rho)

    _check(rho, trace0, times[0], diagnostics)
    yield float(times[0]), rho
    for t_prev, t in zip(times[:-1], times[1:]):
        rho = integrator.advance(rho, float(t - t_prev))
        _check(rho, trace0, t, diagnostics)
        yield float(t), rho


def evolve(rho0, config: SystemConfig, grid: TimeGrid) -> Trajectory:
    """Integrate the master equation and sample on ``grid``."""
    times = grid.times()
    diagnostics = Diagnostics()
    states = np.empty((times.size, config.dim, config.dim), dtype=complex)
    for k, (_, rho) in enumerate(
        iter_evolve(rho0, config, times, grid.dt_sample, diagnostics)
    ):
        states[k] = rho
    return Trajectory(times, states, diagnostics)


def evolve_exact_closed(rho0, config: SystemConfig, t: float) -> np.ndarray:
    """``U rho0 U^+`` with ``U = exp(-i H t)`` from a full diagonalisation of H.

    Pump and leakage rates in ``config`` are ignored.
    """
    energies, vectors = np.linalg.eigh(hamiltonian(config))
    U = (vectors * np.exp(-1j * energies * t)) @ vectors.conj().T
    return U @ np.asarray(rho0, dtype=complex) @ U.conj().T


def steady_state(config: SystemConfig, null_tol: float = 1e-9) -> np.ndarray:
    """Null vector of the Liouvillian, normalised to unit trace.

    A singular value counts as zero when it is below ``null_tol`` times the
    largest one.  If the null space is degenerate a warning is issued and the
    orthogonal projection of the identity onto the null space is returned,
    which is Hermitian and deterministic.
    """
    if config.closed:
        raise ValueError("steady state needs a dissipative channel (pump or kappa > 0)")
    dim = config.dim
    _, s, vh = np.linalg.svd(liouvillian(config))
    null_dim = int(np.sum(s <= null_tol * s[0]))
    if null_dim == 0:
        raise RuntimeError(f"Liouvillian has no null vector (smallest singular value {s[-1]:.3e})")
    if null_dim == 1:
        v = vh[-1].conj()
    else:
        warnings.warn(
            f"steady-state null space has dimension {null_dim}; returning the "
            "projection of the identity onto it",
            DegenerateSteadyStateWarning,
            stacklevel=2,
        )
        basis = vh[-null_dim:].conj().T
        v = basis @ (basis.conj().T @ vec(np.eye(dim, dtype=complex)))
    rho = unvec(v, dim)
    rho = rho / np.trace(rho)
    return 0.5 * (rho + rho.conj().T)
