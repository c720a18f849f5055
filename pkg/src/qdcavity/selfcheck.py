"""Invariant self-test behind ``qdcavity check``."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import dynamics, hilbert, measures, wigner
from .dynamics import SystemConfig, TimeGrid


@dataclass(frozen=True)
class CheckResult:
    name: str
    ok: bool
    detail: str


def random_density_matrix(dim: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    rank = rank or dim
    X = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho)


def _oracle_equivalence():
    worst = 0.0
    for theta in (0.0, math.pi / 2):
        config = SystemConfig(theta=theta)
        traj = dynamics.evolve(config.initial_state(), config, TimeGrid(t_end=math.pi / config.g, dt_sample=5e-3))
        rho0 = traj.states[0]
        for t, rho in zip(traj.times, traj.states):
            exact = dynamics.evolve_exact_closed(rho0, config, t)
            worst = max(worst, float(np.max(np.abs(rho - exact))))
    return worst <= 1e-8, f"max |RK4 - exact| = {worst:.2e} (tol 1e-8)"


def _generator_trace_and_hermiticity():
    rng = np.random.default_rng(7)
    config = SystemConfig(pump=0.5, kappa=6.0)
    worst_trace = worst_herm = 0.0
    for _ in range(20):
        drho = dynamics.lindblad_rhs(random_density_matrix(config.dim, rng), config)
        worst_trace = max(worst_trace, abs(np.trace(drho)))
        worst_herm = max(worst_herm, float(np.max(np.abs(drho - drho.conj().T))))
    ok = worst_trace <= 1e-12 and worst_herm <= 1e-12
    return ok, f"|Tr rhs| <= {worst_trace:.1e}, hermiticity <= {worst_herm:.1e}"


def _liouvillian_matches_rhs():
    rng = np.random.default_rng(11)
    config = SystemConfig(pump=1.0, kappa=2.0, omega_a=0.3, omega_sigma=0.1)
    rho = random_density_matrix(config.dim, rng)
    via_super = dynamics.unvec(dynamics.liouvillian(config) @ dynamics.vec(rho), config.dim)
    err = float(np.max(np.abs(via_super - dynamics.lindblad_rhs(rho, config))))
    return err <= 1e-10, f"superoperator vs matrix form: {err:.1e}"


def _steady_state_residual():
    config = SystemConfig(pump=0.5, kappa=6.0)
    rho = dynamics.steady_state(config)
    res = float(np.max(np.abs(dynamics.lindblad_rhs(rho, config))))
    ok = res <= 1e-10 and hilbert.is_density_matrix(rho)
    return ok, f"|L rho_ss|_max = {res:.1e}"


def _dissipative_invariants():
    config = SystemConfig(pump=0.5, kappa=6.0)
    traj = dynamics.evolve(config.initial_state(), config, TimeGrid(t_end=1.0, dt_sample=0.01))
    d = traj.diagnostics
    ok = d.max_trace_drift < 1e-7 and d.max_hermiticity < 1e-10 and d.min_eigenvalue > -1e-9
    return ok, (
        f"trace drift {d.max_trace_drift:.1e}, hermiticity {d.max_hermiticity:.1e}, "
        f"min eigenvalue {d.min_eigenvalue:.1e}"
    )


def _entanglement_reference_values():
    n = 15
    bell = (hilbert.basis_state(0, 3, n) + hilbert.basis_state(1, 2, n)) / math.sqrt(2)
    rho = hilbert.projector(bell)
    product = hilbert.initial_condition(math.pi / 4, 1.0, n)
    values = (
        measures.negativity(rho),
        measures.linear_entropy(rho),
        measures.negativity(product),
    )
    ok = abs(values[0] - 0.5) < 1e-12 and abs(values[1] - 0.5) < 1e-12 and values[2] < 1e-12
    return ok, "negativity/entropy of (|g3>+|e2>)/sqrt2 = {:.6f}/{:.6f}, product {:.1e}".format(*values)


def _wigner_parity_values():
    n = 15
    vacuum = np.zeros((n, n), dtype=complex)
    vacuum[0, 0] = 1
    three = np.zeros((n, n), dtype=complex)
    three[3, 3] = 1
    w0 = wigner.wigner_point(vacuum, 0)
    w3 = wigner.wigner_point(three, 0)
    ok = abs(w0 - 2) < 1e-9 and abs(w3 + 2) < 1e-9
    return ok, f"W_vac(0) = {w0:.9f}, W_3(0) = {w3:.9f}"


CHECKS = (
    ("oracle equivalence (closed, both inits)", _oracle_equivalence),
    ("generator trace and hermiticity", _generator_trace_and_hermiticity),
    ("Liouvillian matches matrix form", _liouvillian_matches_rhs),
    ("steady-state residual", _steady_state_residual),
    ("dissipative trajectory invariants", _dissipative_invariants),
    ("entanglement reference values", _entanglement_reference_values),
    ("Wigner parity values", _wigner_parity_values),
)


def run_checks() -> list[CheckResult]:
    results = []
    for name, fn in CHECKS:
        try:
            ok, detail = fn()
        except Exception as exc:  # a crash is a failed check, not a crashed suite
            ok, detail = False, f"{type(exc).__name__}: {exc}"
        results.append(CheckResult(name, bool(ok), detail))
    return results
