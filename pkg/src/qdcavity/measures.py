"""Entanglement measures, field-state diagnostics and time-series analysis.

Subsystem 1 is the field throughout: negativity transposes the field
indices and the linear entropy by default traces the field out and measures
the mixedness of the quantum-dot state.  On the 2 (x) n space with n > 3 a
positive partial transpose no longer implies separability, so negativity is a
witness there rather than a full quantifier.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.signal import find_peaks

from .hilbert import Subsystem, partial_trace, partial_transpose

SUDDEN_DEATH_TOL = 1e-6


class UndefinedFitError(ValueError):
    """The field state has no weight on ``{|0>, |3>}``."""


class AperiodicSignalError(ValueError):
    pass


@dataclass(frozen=True)
class TimeSeries:
    times: np.ndarray
    values: np.ndarray
    label: str = ""

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        values = np.asarray(self.values, dtype=float)
        if times.shape != values.shape or times.ndim != 1:
            raise ValueError("times and values must be 1-D arrays of equal length")
        if np.any(np.diff(times) <= 0):
            raise ValueError("times must be strictly increasing")
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "values", values)

    def __len__(self):
        return self.times.size

    @property
    def dt(self) -> float:
        return float(np.median(np.diff(self.times)))


@dataclass(frozen=True)
class SuddenDeathReport:
    dead_intervals: list = field(default_factory=list)
    revival_count: int = 0
    zero_tolerance: float = SUDDEN_DEATH_TOL


def negativity(rho) -> float:
    """``(||rho^T1||_1 - 1) / 2`` as the magnitude sum of negative PT eigenvalues."""
    eig = np.linalg.eigvalsh(partial_transpose(rho, "field"))
    return float(np.abs(eig[eig < 0]).sum())


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.einsum("ij,ji->", rho, rho).real)


def linear_entropy(rho, traced_out: Subsystem = "field") -> float:
    """``1 - Tr(rho_r^2)`` of the state left after tracing out ``traced_out``."""
    if traced_out == "field":
        reduced = partial_trace(rho, keep="qubit")
    elif traced_out == "qubit":
        reduced = partial_trace(rho, keep="field")
    else:
        raise ValueError(f"traced_out must be 'qubit' or 'field', got {traced_out!r}")
    return 1.0 - purity(reduced)


def fock_populations(rho_field) -> np.ndarray:
    return np.real(np.diag(np.asarray(rho_field))).copy()


def extract_beta(rho_field) -> float:
    """``|beta|`` from fitting the field to ``beta|0> + sqrt(1-|beta|^2)|3>``.

    Only the weights on ``|0>`` and ``|3>`` enter: ``sqrt(p0 / (p0 + p3))``.
    """
    pops = fock_populations(rho_field)
    p0 = max(pops[0], 0.0)
    p3 = max(pops[3], 0.0)
    if p0 + p3 < 1e-12:
        raise UndefinedFitError(f"p0 + p3 = {p0 + p3:.3e} is too small for a fit")
    return float(min(np.sqrt(p0 / (p0 + p3)), 1.0))


def trace_distance(rho, sigma) -> float:
    diff = np.asarray(rho) - np.asarray(sigma)
    eig = np.linalg.eigvalsh(0.5 * (diff + diff.conj().T))
    return float(0.5 * np.abs(eig).sum())


def _parabolic_vertex(y_left, y_mid, y_right):
    """Offset (in samples) and value of the parabola through three points."""
    denom = y_left - 2 * y_mid + y_right
    if denom == 0:
        return 0.0, y_mid
    offset = 0.5 * (y_left - y_right) / denom
    return offset, y_mid - 0.25 * (y_left - y_right) * offset


def _lag_correlation(values, max_lag):
    corr = np.full(max_lag + 1, np.nan)
    for lag in range(1, max_lag + 1):
        x, y = values[:-lag], values[lag:]
        sx, sy = x.std(), y.std()
        if sx > 0 and sy > 0:
            corr[lag] = np.mean((x - x.mean()) * (y - y.mean())) / (sx * sy)
    return corr


def detect_period(series: TimeSeries, min_correlation: float = 0.5) -> float:
    """Dominant period from the lagged autocorrelation of a uniformly sampled series.

    The correlation at each lag is the Pearson coefficient of the overlapping
    segments, so a perfectly periodic signal scores exactly 1 at its period
    regardless of how many periods are covered.  The first local maximum
    within 10% of the strongest one is taken and refined by a parabola
    through its neighbours.  The relative uncertainty is
    :func:`period_uncertainty`.
    """
    values = series.values
    n = values.size
    max_lag = (2 * n) // 3
    if max_lag < 3 or not np.all(np.isfinite(values)):
        raise AperiodicSignalError("series too short or contains non-finite values")
    corr = _lag_correlation(values, max_lag)
    c = np.nan_to_num(corr, nan=-np.inf)
    peaks = [
        k for k in range(2, max_lag) if c[k] >= c[k - 1] and c[k] > c[k + 1] and c[k] > min_correlation
    ]
    if not peaks:
        raise AperiodicSignalError(f"no autocorrelation peak above {min_correlation}")
    best = max(c[k] for k in peaks)
    lag = next(k for k in peaks if c[k] >= 0.9 * best)
    offset, _ = _parabolic_vertex(c[lag - 1], c[lag], c[lag + 1])
    return float((lag + offset) * series.dt)


def period_uncertainty(series: TimeSeries, period: float) -> float:
    return 0.5 * series.dt / period


def local_extrema(series: TimeSeries, kind: str = "max", prominence: float = 0.0) -> np.ndarray:
    """Indices of interior local maxima (or minima) of ``series``.

    ``prominence`` is the topographic prominence of :func:`scipy.signal.find_peaks`;
    flat tops are reported at their middle sample.
    """
    if kind not in ("max", "min"):
        raise ValueError(f"kind must be 'max' or 'min', got {kind!r}")
    v = series.values if kind == "max" else -series.values
    idx, _ = find_peaks(v, prominence=prominence if prominence > 0 else None)
    return idx.astype(int)


def refined_peak(series: TimeSeries) -> tuple[float, float]:
    """Time and value of the global maximum, refined by parabolic interpolation."""
    v = series.values
    k = int(np.argmax(v))
    if 0 < k < v.size - 1:
        offset, value = _parabolic_vertex(v[k - 1], v[k], v[k + 1])
        # parabolic offset is in sample units; local spacing may differ at the edges
        step = series.times[k + 1] - series.times[k] if offset > 0 else series.times[k] - series.times[k - 1]
        return float(series.times[k] + offset * step), float(value)
    return float(series.times[k]), float(v[k])


def sudden_death_report(series: TimeSeries, zero_tol: float = SUDDEN_DEATH_TOL) -> SuddenDeathReport:
    """Maximal runs of samples with value ``<= zero_tol`` and how many end in revival."""
    if not zero_tol > 0:
        raise ValueError("zero_tol must be positive")
    dead = series.values <= zero_tol
    intervals = []
    revivals = 0
    k = 0
    n = dead.size
    while k < n:
        if not dead[k]:
            k += 1
            continue
        start = k
        while k + 1 < n and dead[k + 1]:
            k += 1
        intervals.append((float(series.times[start]), float(series.times[k])))
        if k + 1 < n:
            revivals += 1
        k += 1
    return SuddenDeathReport(intervals, revivals, zero_tol)
