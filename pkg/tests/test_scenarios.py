import math

import numpy as np
import pytest

from qdcavity import measures, scenarios
from qdcavity.dynamics import SystemConfig, TimeGrid
from qdcavity.measures import detect_period, local_extrema, trace_distance
from qdcavity.scenarios import (
    ScenarioSpec,
    Sweep,
    analytic_period,
    run_closed_excited,
    run_closed_ground,
    run_entanglement_closed,
)

G = 10.0
T_GROUND = math.pi / (G * math.sqrt(3))
T_EXCITED = math.pi / G


@pytest.fixture(scope="module")
def ground():
    return run_closed_ground()


@pytest.fixture(scope="module")
def excited():
    return run_closed_excited()


def schmidt_product_max(beta):
    """Largest c1 c2 along the exact theta = 0 orbit.

    The state is (beta|0> + c cos(wt)|3>)|g> - i c sin(wt)|e,2> with
    c^2 = 1 - beta^2; the two rows have disjoint Fock support, so the
    Schmidt coefficients are the row norms and c1 c2 = sqrt(x (1 - x)) with
    x = c^2 sin^2(wt) in [0, c^2].
    """
    c2 = 1 - beta**2
    x = min(c2, 0.5)
    return math.sqrt(x * (1 - x))


class TestSpecs:
    def test_sweep_validation(self):
        assert Sweep("pump_P", (1, 2)).parameter == "pump"
        for bad in ((), (1, 1), (2, 1), (-1, 1)):
            with pytest.raises(ValueError):
                Sweep("kappa", bad)
        with pytest.raises(ValueError):
            Sweep("g", (1,))

    def test_snapshot_bounds(self):
        spec = ScenarioSpec("x", SystemConfig(), TimeGrid(t_end=0.1, dt_sample=0.01), snapshots=(0.2,))
        with pytest.raises(ValueError):
            spec.resolved_snapshots()

    def test_closed_preconditions(self):
        with pytest.raises(ValueError):
            scenarios.closed_ground_spec(kappa=1.0)
        with pytest.raises(ValueError):
            scenarios.closed_excited_spec(theta=0.0)
        with pytest.raises(ValueError):
            scenarios.dissipative_spec()
        with pytest.raises(ValueError):
            scenarios.run_dissipative_sweep(scenarios.dissipative_spec(kappa=1.0))

    def test_analytic_periods(self):
        assert analytic_period(SystemConfig()) == pytest.approx(0.18137993642342178)
        assert analytic_period(SystemConfig(theta=math.pi / 2)) == pytest.approx(math.pi / 10)
        assert analytic_period(SystemConfig(theta=0.3)) is None
        assert analytic_period(SystemConfig(omega_a=1.0)) is None

    def test_default_grids(self):
        closed = scenarios.default_grid(SystemConfig())
        assert closed.t_end == pytest.approx(3 * T_GROUND)
        open_ = scenarios.default_grid(SystemConfig(pump=0.5, kappa=6))
        assert open_.t_end == pytest.approx(40)
        with pytest.raises(ValueError):
            scenarios.default_grid(SystemConfig(g=0))


class TestClosedGround:
    def test_initial_values(self, ground):
        assert ground.series["beta"].values[0] == pytest.approx(0.9, abs=1e-15)
        assert ground.series["negativity"].values[0] == 0
        assert ground.snapshots[0.0].wigner.value_at(0, 0) == pytest.approx(1.24, abs=1e-12)

    def test_snapshot_times(self, ground):
        np.testing.assert_allclose(sorted(ground.snapshots), [0, T_GROUND / 2, T_GROUND])
        # full transfer to |e,2> at half period leaves no |3> weight
        assert ground.snapshots[T_GROUND / 2].populations[3] == pytest.approx(0, abs=1e-9)

    def test_series_share_grid(self, ground):
        times = ground.times
        assert all(np.array_equal(s.times, times) for s in ground.series.values())
        assert set(ground.series) == {label for label, _ in scenarios.SERIES_LABELS}

    def test_resonances_equally_spaced(self, ground):
        beta = ground.series["beta"]
        peaks = beta.times[local_extrema(beta, "max", prominence=1e-4)]
        np.testing.assert_allclose(np.diff(peaks), T_GROUND, atol=2 * beta.dt)

    def test_max_negativity_matches_schmidt_oracle(self, ground):
        _, peak = measures.refined_peak(ground.series["negativity"])
        assert peak == pytest.approx(schmidt_product_max(0.9), abs=1e-6)
        assert peak <= 0.5


class TestClosedExcited:
    def test_period(self, excited):
        assert detect_period(excited.series["beta"]) == pytest.approx(T_EXCITED, rel=0.01)

    def test_vacuum_empties(self, excited):
        assert excited.series["pop_0"].values.min() < 1e-6

    def test_beta_minimum_where_vacuum_empty(self, excited):
        beta, p0 = excited.series["beta"], excited.series["pop_0"]
        assert abs(np.argmin(beta.values) - np.argmin(p0.values)) <= 2

    def test_entropy_minimum_between_negativity_zeros(self, excited):
        neg, ent = excited.series["negativity"], excited.series["linear_entropy"]
        zeros = local_extrema(neg, "min")
        zeros = zeros[neg.values[zeros] < 1e-2]
        ent_min = local_extrema(ent, "min")
        assert len(zeros) >= 2
        for a, b in zip(zeros, zeros[1:]):
            inside = ent_min[(ent_min > a) & (ent_min < b)]
            assert inside.size >= 1
            assert ent.values[inside].max() > 1e-2


class TestEntanglementClosed:
    def test_periods_agree(self, ground):
        dt = ground.series["beta"].dt
        t_beta = detect_period(ground.series["beta"])
        assert detect_period(ground.series["negativity"]) == pytest.approx(t_beta, abs=2 * dt)
        assert detect_period(ground.series["linear_entropy"]) == pytest.approx(t_beta, abs=2 * dt)

    def test_generic_angle(self):
        result = run_entanglement_closed(0.6)
        assert result.config.theta == 0.6
        neg, ent = result.series["negativity"].values, result.series["linear_entropy"].values
        np.testing.assert_allclose(ent, 2 * neg**2, atol=1e-9)
        assert neg.max() <= 0.5


class TestInvariants:
    @pytest.mark.parametrize("which", ["ground", "excited"])
    def test_closed_runs(self, which, request):
        result = request.getfixturevalue(which)
        assert result.series["trace_drift"].values.max() < 1e-7
        np.testing.assert_allclose(result.series["purity"].values, 1, atol=1e-8)
        assert result.sudden_death is None and result.steady_state is None

    def test_deterministic(self):
        spec = scenarios.closed_ground_spec()
        spec = ScenarioSpec(spec.name, spec.config, TimeGrid(t_end=0.05, dt_sample=0.005), snapshots=(0.05,))
        a, b = scenarios.run_scenario(spec), scenarios.run_scenario(spec)
        for label in a.series:
            assert np.array_equal(a.series[label].values, b.series[label].values, equal_nan=True)
        assert np.array_equal(a.final_state, b.final_state)
        assert np.array_equal(a.snapshots[0.05].wigner.values, b.snapshots[0.05].wigner.values)


class TestDissipative:
    def test_reaches_steady_value(self, dissipative_runs):
        result = dissipative_runs.result(0.5, 6)
        assert result.series["trace_drift"].values.max() < 1e-7
        tail = result.series["negativity"].values[-len(result.times) // 10:]
        assert tail.max() - tail.min() < 1e-4
        assert trace_distance(result.final_state, result.steady_state) < 1e-4

    def test_sudden_death_example(self, dissipative_runs):
        result = dissipative_runs.result(0.5, 6)
        report = result.sudden_death
        assert report.revival_count >= 1
        assert report.dead_intervals[-1][1] == result.times[-1]

    def test_sweep_members(self):
        spec = scenarios.kappa_sweep_spec(values=(4.0, 8.0), pump=1.0)
        spec = ScenarioSpec(spec.name, spec.config, TimeGrid(t_end=0.2, dt_sample=0.01), (0.0,), spec.sweep)
        results = scenarios.run_dissipative_sweep(spec)
        assert [r.config.kappa for r in results] == [4.0, 8.0]
        assert all(r.config.pump == 1.0 for r in results)
        assert all(r.steady_negativity is not None and r.sudden_death is not None for r in results)
        threaded = scenarios.run_dissipative_sweep(spec, workers=2)
        for r, t in zip(results, threaded):
            assert np.array_equal(r.final_state, t.final_state)

    @pytest.mark.slow
    def test_full_sweep_converges(self, dissipative_runs):
        for kappa in scenarios.DEFAULT_KAPPA_SWEEP:
            result = dissipative_runs.result(0.5, kappa)
            assert trace_distance(result.final_state, result.steady_state) < 1e-4
