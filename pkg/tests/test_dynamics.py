import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qdcavity import dynamics, hilbert, measures
from qdcavity.dynamics import (
    DegenerateSteadyStateWarning,
    InvariantViolation,
    StepSizeError,
    SystemConfig,
    TimeGrid,
    evolve,
    evolve_exact_closed,
    hamiltonian,
    lindblad_rhs,
    steady_state,
)
from qdcavity.hilbert import basis_state, partial_trace, projector
from qdcavity.selfcheck import random_density_matrix

G = 10.0
N = 15


def idx(q, n, n_max=N):
    return q * n_max + n


def expect(op, rho):
    return np.trace(op @ rho).real


class TestConfig:
    def test_validation(self):
        for bad in (dict(g=-1), dict(pump=-1), dict(kappa=-0.1), dict(beta=1.1), dict(n_max=4)):
            with pytest.raises(ValueError):
                SystemConfig(**bad)

    def test_detuning_is_derived(self):
        assert SystemConfig(omega_a=2.0, omega_sigma=1.5).detuning == pytest.approx(0.5)


class TestTimeGrid:
    def test_validation(self):
        with pytest.raises(ValueError):
            TimeGrid(t_end=0, dt_sample=0.1)
        with pytest.raises(ValueError):
            TimeGrid(t_end=1, dt_sample=0)
        with pytest.raises(ValueError):
            TimeGrid(t_end=1, dt_sample=2)

    def test_times_include_end(self):
        np.testing.assert_allclose(TimeGrid(t_end=1, dt_sample=0.25).times(), [0, 0.25, 0.5, 0.75, 1])
        t = TimeGrid(t_end=1, dt_sample=0.3).times()
        np.testing.assert_allclose(t, [0, 0.3, 0.6, 0.9, 1.0])
        assert t[-1] == 1.0


class TestHamiltonian:
    def test_uncoupled_is_diagonal(self):
        H = hamiltonian(SystemConfig(g=0, omega_a=2.0, omega_sigma=0.7))
        diag = [2.0 * n + 0.7 * q for q in (0, 1) for n in range(N)]
        np.testing.assert_allclose(H, np.diag(diag), atol=1e-13)

    def test_coupling_element(self):
        H = hamiltonian(SystemConfig(g=G, omega_a=1.3, omega_sigma=0.2))
        assert H[idx(1, 2), idx(0, 3)] == pytest.approx(G * math.sqrt(3))
        np.testing.assert_allclose(H, H.conj().T)

    def test_only_manifold_couplings(self):
        H = hamiltonian(SystemConfig())
        N_exc = dynamics.excitation_numbers(N)
        rows, cols = np.nonzero(H)
        assert np.all(N_exc[rows] == N_exc[cols])

    @pytest.mark.parametrize("n", [1, 2, 3, 4])
    def test_dressed_splitting(self, n):
        # oracle: eigenvalues of [[n w, g sqrt n], [g sqrt n, n w]] differ by 2 g sqrt n
        w = 0.4
        block = np.array([[n * w, G * math.sqrt(n)], [G * math.sqrt(n), n * w]])
        oracle = np.diff(np.linalg.eigvalsh(block))[0]
        assert oracle == pytest.approx(2 * G * math.sqrt(n))
        H = hamiltonian(SystemConfig(omega_a=w, omega_sigma=w))
        sel = [idx(0, n), idx(1, n - 1)]
        assert np.diff(np.linalg.eigvalsh(H[np.ix_(sel, sel)]))[0] == pytest.approx(oracle)


class TestLindbladRhs:
    def test_eigenprojector_is_stationary(self):
        config = SystemConfig(omega_a=0.3, omega_sigma=0.3)
        _, vecs = np.linalg.eigh(hamiltonian(config))
        rho = projector(vecs[:, 7])
        assert np.max(np.abs(lindblad_rhs(rho, config))) < 1e-12

    def test_photon_decay_rate(self):
        # d<n>/dt = -kappa <n> for the cavity damping term; <n> = 1 here
        config = SystemConfig(g=0, kappa=2.5)
        rho = projector(basis_state(0, 1, N))
        a, _ = hilbert.joint_operators(N)
        assert expect(a.conj().T @ a, lindblad_rhs(rho, config)) == pytest.approx(-2.5)

    def test_pump_rate(self):
        # d<s+s>/dt = P (1 - <s+s>) = P from the ground state
        config = SystemConfig(g=0, pump=0.7)
        rho = projector(basis_state(0, 0, N))
        _, s = hilbert.joint_operators(N)
        assert expect(s.conj().T @ s, lindblad_rhs(rho, config)) == pytest.approx(0.7)

    def test_coherent_sign_convention(self):
        # i[rho, H] == -i[H, rho]
        config = SystemConfig()
        rho = random_density_matrix(config.dim, np.random.default_rng(2))
        H = hamiltonian(config)
        np.testing.assert_allclose(lindblad_rhs(rho, config), 1j * (rho @ H - H @ rho), atol=1e-12)

    def test_matches_liouvillian(self):
        config = SystemConfig(pump=0.5, kappa=6, omega_a=0.2, omega_sigma=-0.1)
        rho = random_density_matrix(config.dim, np.random.default_rng(4))
        via = dynamics.unvec(dynamics.liouvillian(config) @ dynamics.vec(rho), config.dim)
        np.testing.assert_allclose(via, lindblad_rhs(rho, config), atol=1e-12)

    @given(st.integers(0, 2**32 - 1), st.floats(0, 5), st.floats(0, 8))
    @settings(max_examples=30, deadline=None)
    def test_trace_free_and_hermitian(self, seed, pump, kappa):
        config = SystemConfig(pump=pump, kappa=kappa)
        rho = random_density_matrix(config.dim, np.random.default_rng(seed))
        out = lindblad_rhs(rho, config)
        assert abs(np.trace(out)) < 1e-12
        np.testing.assert_allclose(out, out.conj().T, atol=1e-12)

    def test_shape_check(self):
        with pytest.raises(ValueError):
            lindblad_rhs(np.eye(10), SystemConfig())


class TestSectors:
    def test_generator_never_mixes_sectors(self):
        config = SystemConfig(pump=0.5, kappa=6)
        rhs = dynamics._Generator(config)
        sector_of = np.empty(config.dim**2, dtype=int)
        for k, sector in enumerate(dynamics.coherence_sectors(N)):
            sector_of[sector] = k
        rng = np.random.default_rng(0)
        for flat in rng.choice(config.dim**2, size=40, replace=False):
            unit = np.zeros(config.dim**2, dtype=complex)
            unit[flat] = 1
            out = rhs(unit.reshape(config.dim, config.dim)).ravel()
            assert set(sector_of[np.flatnonzero(out)]) <= {sector_of[flat]}

    def test_sector_propagation_equals_direct_rk4(self):
        config = SystemConfig(pump=0.5, kappa=6, theta=0.4, beta=0.6 + 0.3j)
        rho = random_density_matrix(config.dim, np.random.default_rng(9))
        integrator = dynamics._Integrator(config, dynamics.max_step(config, 0.01))
        np.testing.assert_allclose(
            integrator.advance(rho, 0.01), integrator.step_directly(rho, 0.01), atol=1e-13
        )


def closed_traj(theta, t_end, dt=1e-3, **kw):
    config = SystemConfig(theta=theta, **kw)
    return config, evolve(config.initial_state(), config, TimeGrid(t_end=t_end, dt_sample=dt))


class TestEvolve:
    def test_free_evolution_keeps_populations(self):
        config = SystemConfig(g=0, omega_a=0.3, omega_sigma=0.3, theta=0.7)
        traj = evolve(config.initial_state(), config, TimeGrid(t_end=1, dt_sample=0.1))
        pops = np.real(np.einsum("tii->ti", traj.states))
        np.testing.assert_allclose(pops, pops[:1].repeat(len(traj), 0), atol=1e-12)

    def test_vacuum_component_is_decoupled(self):
        _, traj = closed_traj(0.0, 0.3)
        p_g0 = traj.states[:, idx(0, 0), idx(0, 0)].real
        np.testing.assert_allclose(p_g0, 0.81, atol=1e-12)

    def test_three_photon_population_returns_after_rabi_period(self):
        T = math.pi / (G * math.sqrt(3))
        _, traj = closed_traj(0.0, T)
        p3 = measures.fock_populations(partial_trace(traj.states[-1], "field"))[3]
        assert traj.times[-1] == T
        assert p3 == pytest.approx(0.19, abs=1e-10)

    @pytest.mark.parametrize("theta", [0.0, math.pi / 2, 0.9])
    def test_matches_exact_oracle(self, theta):
        config, traj = closed_traj(theta, 10 / G, dt=5e-3, beta=0.7 + 0.5j)
        for t, rho in zip(traj.times, traj.states):
            exact = evolve_exact_closed(traj.states[0], config, t)
            assert np.max(np.abs(rho - exact)) < 1e-8

    def test_closed_conservation_laws(self):
        config, traj = closed_traj(0.6, 0.5, dt=5e-3, omega_a=0.5, omega_sigma=0.5)
        a, s = hilbert.joint_operators(N)
        H = hamiltonian(config)
        exc = a.conj().T @ a + s.conj().T @ s
        energy = [expect(H, r) for r in traj.states]
        purity = [measures.purity(r) for r in traj.states]
        excitations = [expect(exc, r) for r in traj.states]
        for series in (energy, purity, excitations):
            assert np.ptp(series) < 1e-8

    def test_snapshots_are_density_matrices(self):
        config = SystemConfig(pump=0.5, kappa=6)
        traj = evolve(config.initial_state(), config, TimeGrid(t_end=0.5, dt_sample=0.01))
        d = traj.diagnostics
        assert d.max_trace_drift < 1e-7
        assert d.max_hermiticity < 1e-10
        assert d.min_eigenvalue > -1e-9

    def test_trace_is_not_renormalised(self):
        # drift is measured relative to Tr(rho0); a half-trace input stays half-trace
        config = SystemConfig(kappa=2.0)
        traj = evolve(0.5 * config.initial_state(), config, TimeGrid(t_end=0.2, dt_sample=0.05))
        np.testing.assert_allclose(np.trace(traj.states, axis1=1, axis2=2), 0.5, atol=1e-12)

    def test_invalid_initial_state_aborts(self):
        config = SystemConfig()
        rho0 = np.diag([1.2, -0.2] + [0] * (config.dim - 2)).astype(complex)
        with pytest.raises(InvariantViolation, match="min eigenvalue"):
            evolve(rho0, config, TimeGrid(t_end=0.01, dt_sample=0.01))

    def test_step_size_underflow(self):
        config = SystemConfig(kappa=1e9)
        with pytest.raises(StepSizeError):
            evolve(config.initial_state(), config, TimeGrid(t_end=1.0, dt_sample=1.0))

    def test_dissipative_trace_distance_contracts(self):
        config = SystemConfig(pump=0.5, kappa=4)
        grid = TimeGrid(t_end=2, dt_sample=0.05)
        a = evolve(SystemConfig(theta=0).initial_state(), config, grid)
        b = evolve(SystemConfig(theta=math.pi / 2, beta=0.3).initial_state(), config, grid)
        dist = [measures.trace_distance(x, y) for x, y in zip(a.states, b.states)]
        assert np.all(np.diff(dist) <= 1e-8)


class TestExactClosed:
    def test_identity_at_zero(self):
        config = SystemConfig(theta=0.3)
        rho0 = config.initial_state()
        np.testing.assert_allclose(evolve_exact_closed(rho0, config, 0.0), rho0, atol=1e-14)

    def test_half_rabi_transfer(self):
        config = SystemConfig()
        rho = evolve_exact_closed(projector(basis_state(0, 3, N)), config, math.pi / (2 * G * math.sqrt(3)))
        assert rho[idx(1, 2), idx(1, 2)].real == pytest.approx(1, abs=1e-12)


class TestSteadyState:
    def test_unique_state_decays_to_ground(self):
        rho = steady_state(SystemConfig(kappa=3.0))
        np.testing.assert_allclose(rho, projector(basis_state(0, 0, N)), atol=1e-10)

    def test_uncoupled_leakage_is_degenerate(self):
        # with g = 0 and no pump the dot is frozen: every qubit state (x) |0> is stationary
        config = SystemConfig(g=0, kappa=3.0)
        with pytest.warns(DegenerateSteadyStateWarning):
            rho = steady_state(config)
        field = partial_trace(rho, "field")
        np.testing.assert_allclose(field[0, 0], 1, atol=1e-10)
        assert np.max(np.abs(lindblad_rhs(rho, config))) < 1e-10
        assert hilbert.is_density_matrix(rho)

    def test_pump_only_excites_dot(self):
        config = SystemConfig(g=0, pump=0.8)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", DegenerateSteadyStateWarning)
            rho = steady_state(config)
        np.testing.assert_allclose(partial_trace(rho, "qubit"), [[0, 0], [0, 1]], atol=1e-10)

    def test_residual_and_validity(self):
        config = SystemConfig(pump=0.5, kappa=6)
        rho = steady_state(config)
        assert np.max(np.abs(lindblad_rhs(rho, config))) <= 1e-10
        assert hilbert.is_density_matrix(rho)

    def test_fixed_point_of_evolve(self):
        config = SystemConfig(pump=1.5, kappa=6)
        rho = steady_state(config)
        traj = evolve(rho, config, TimeGrid(t_end=1, dt_sample=0.1))
        assert max(np.max(np.abs(s - rho)) for s in traj.states) < 1e-8

    def test_needs_dissipation(self):
        with pytest.raises(ValueError):
            steady_state(SystemConfig())


def test_truncation_convergence_closed():
    """Doubling n_max changes closed-run observables by < 1e-6."""
    out = []
    for n_max in (15, 30):
        config = SystemConfig(n_max=n_max, theta=math.pi / 2)
        traj = evolve(config.initial_state(), config, TimeGrid(t_end=0.4, dt_sample=0.02))
        out.append(np.array([[measures.negativity(r), measures.linear_entropy(r)] for r in traj.states]))
    assert np.max(np.abs(out[0] - out[1])) < 1e-6


def test_truncation_convergence_dissipative():
    out = []
    for n_max in (15, 30):
        config = SystemConfig(n_max=n_max, pump=3.0, kappa=2.0)
        traj = evolve(config.initial_state(), config, TimeGrid(t_end=2.0, dt_sample=0.05))
        out.append(np.array([measures.negativity(r) for r in traj.states]))
    assert np.max(np.abs(out[0] - out[1])) < 1e-6
