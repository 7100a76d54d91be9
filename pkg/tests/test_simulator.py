"""Tests for the synthetic farm generator: curves, thermal dynamics, fault
injection, pairing of noise across fault variants, and the scenario grammar."""

import numpy as np
import pytest

from windnbm.errors import ConfigError
from windnbm.scada import (
    SECONDS_PER_DAY,
    TimeInterval,
    dataset_fingerprint,
    parse_rfc3339,
)
from windnbm.simulator import (
    GEARBOX_IMS_COMPONENT,
    EnvironmentParams,
    FaultScenario,
    NoiseParams,
    SimConfig,
    TurbineParams,
    default_sim_config,
    healthy_variant,
    load_scenario_file,
    pitch_curve,
    power_curve,
    rotor_speed_curve,
    sim_config_from_dict,
    sim_config_to_dict,
    simulate_farm,
    thermal_steady_state,
    thermal_step,
    wind_process,
    _thermal_path,
)

P = TurbineParams()
T2010 = parse_rfc3339("2010-01-01T00:00:00Z")

QUIET_ENV = EnvironmentParams(
    mean_wind=0.0,
    wind_sigma=0.0,
    wind_seasonal_amp=0.0,
    wind_diurnal_amp=0.0,
    mean_ambient=10.0,
    ambient_seasonal_amp=0.0,
    ambient_diurnal_amp=0.0,
    ambient_sigma=0.0,
    nacelle_sigma=0.0,
)

ZERO_NOISE = NoiseParams(0, 0, 0, 0, 0, 0, 0)


class TestPowerCurve:
    def test_zero_wind(self):
        assert power_curve(0.0, P) == 0.0

    def test_below_cut_in(self):
        assert power_curve(P.cut_in - 0.1, P) == 0.0

    def test_rated_wind_gives_rated_power(self):
        assert power_curve(P.rated, P) == P.rated_power

    def test_above_cut_out(self):
        assert power_curve(P.cut_out, P) == 0.0
        assert power_curve(P.cut_out + 5, P) == 0.0

    def test_cubic_midpoint(self):
        mid = 0.5 * (P.cut_in + P.rated)
        expected = P.rated_power * (mid**3 - P.cut_in**3) / (
            P.rated**3 - P.cut_in**3
        )
        assert power_curve(mid, P) == pytest.approx(expected)

    def test_monotone_between_cut_in_and_rated(self):
        grid = np.linspace(P.cut_in, P.rated, 100)
        values = power_curve(grid, P)
        assert np.all(np.diff(values) > 0)
        assert values[0] == 0.0
        assert values[-1] == P.rated_power


class TestRegulationCurves:
    def test_rotor_zero_outside_operating_range(self):
        assert rotor_speed_curve(1.0, P) == 0.0
        assert rotor_speed_curve(30.0, P) == 0.0

    def test_rotor_saturates_at_rated(self):
        assert rotor_speed_curve(P.rated, P) == rotor_speed_curve(P.rated + 5, P)

    def test_rotor_monotone_below_rated(self):
        grid = np.linspace(P.cut_in, P.rated, 50)
        assert np.all(np.diff(rotor_speed_curve(grid, P)) >= 0)

    def test_pitch_zero_below_rated(self):
        assert pitch_curve(P.rated - 1.0, P) == 0.0

    def test_pitch_rises_above_rated(self):
        assert pitch_curve(P.rated + 2.0, P) > 0.0

    def test_pitch_feathered_at_cut_out(self):
        assert pitch_curve(P.cut_out, P) == 90.0


class TestThermalStep:
    def test_equilibrium_unchanged(self):
        state = (15.0, 15.0)
        assert thermal_step(state, (0.0, 15.0, 1.0), P) == state

    def test_fixed_point_matches_analytic_solution(self):
        # Iterated map must land on the solved 2x2 linear system.
        power, ambient, mult = 1500.0, 9.0, 1.2
        state = (0.0, 0.0)
        for _ in range(3000):
            state = thermal_step(state, (power, ambient, mult), P)
        expected = thermal_steady_state(power, ambient, mult, P)
        assert state[0] == pytest.approx(expected[0], abs=1e-9)
        assert state[1] == pytest.approx(expected[1], abs=1e-9)

    def test_one_more_step_is_fixed(self):
        expected = thermal_steady_state(800.0, 5.0, 1.0, P)
        stepped = thermal_step(expected, (800.0, 5.0, 1.0), P)
        assert stepped[0] == pytest.approx(expected[0], abs=1e-12)
        assert stepped[1] == pytest.approx(expected[1], abs=1e-12)

    def test_fault_multiplier_strictly_heats_ims(self):
        state = (30.0, 28.0)
        inputs_hot = (1000.0, 10.0, 1.5)
        inputs_ok = (1000.0, 10.0, 1.0)
        assert thermal_step(state, inputs_hot, P)[0] > thermal_step(state, inputs_ok, P)[0]

    def test_multiplier_below_one_rejected(self):
        with pytest.raises(ConfigError):
            thermal_step((20.0, 20.0), (100.0, 10.0, 0.9), P)

    def test_zero_power_converges_monotonically_to_ambient(self):
        # From an equal-temperature start both nodes decay together.
        ambient = 10.0
        state = (60.0, 60.0)
        prev = state
        for _ in range(300):
            state = thermal_step(state, (0.0, ambient, 1.0), P)
            assert ambient <= state[0] < prev[0]
            assert ambient <= state[1] < prev[1]
            prev = state
        assert state[0] == pytest.approx(ambient, abs=1e-4)

    def test_zero_power_converges_from_unequal_start(self):
        ambient = 10.0
        state = (60.0, 45.0)
        for _ in range(500):
            state = thermal_step(state, (0.0, ambient, 1.0), P)
        assert state[0] == pytest.approx(ambient, abs=1e-6)
        assert state[1] == pytest.approx(ambient, abs=1e-6)

    def test_vectorized_path_matches_stepwise_loop(self):
        rng = np.random.default_rng(11)
        n = 400
        power = rng.uniform(0, 2000, size=n)
        ambient = rng.uniform(-5, 25, size=n)
        mult = np.ones(n)
        mult[150:300] = 1.0 + 0.4 * np.linspace(0, 1, 150)
        up = np.ones(n, dtype=bool)
        up[300:340] = False
        t_ims, t_hss = _thermal_path(power, ambient, mult, up, P)
        for i0, i1 in ((0, 300), (340, 400)):
            state = (ambient[i0], ambient[i0])
            for k in range(i0, i1):
                state = thermal_step(state, (power[k], ambient[k], mult[k]), P)
                assert t_ims[k] == pytest.approx(state[0], abs=1e-9)
                assert t_hss[k] == pytest.approx(state[1], abs=1e-9)
        assert np.all(np.isnan(t_ims[300:340]))


class TestTurbineParamsValidation:
    def test_unstable_coupling_rejected(self):
        with pytest.raises(ConfigError, match="unstable"):
            TurbineParams(h=0.7, c=0.4)

    def test_wind_speed_ordering_enforced(self):
        with pytest.raises(ConfigError):
            TurbineParams(cut_in=13.0)

    def test_h_zero_allowed(self):
        TurbineParams(h=0.0)


class TestWindProcess:
    def test_single_step_nonnegative(self):
        assert wind_process(0, 1)[0] >= 0.0

    def test_nonnegative_and_mean_in_band(self):
        wind = wind_process(42, 52560, start_ts=T2010)
        assert np.all(wind >= 0)
        assert 6.0 <= wind.mean() <= 10.0

    def test_lag1_autocorrelation_exceeds_point_nine(self):
        wind = wind_process(13, 10_000, start_ts=T2010)
        x = wind - wind.mean()
        rho = float(np.dot(x[:-1], x[1:]) / np.dot(x, x))
        assert rho > 0.9

    def test_seed_sensitivity(self):
        a = wind_process(1, 500)
        b = wind_process(2, 500)
        assert not np.array_equal(a, b)

    def test_zero_steps_rejected(self):
        with pytest.raises(ConfigError):
            wind_process(1, 0)


def quiet_config(**overrides):
    base = dict(
        seed=5,
        n_turbines=1,
        period=TimeInterval(T2010, T2010 + SECONDS_PER_DAY),
        environment=QUIET_ENV,
        noise=ZERO_NOISE,
    )
    base.update(overrides)
    return SimConfig(**base)


class TestSimulateFarm:
    def test_no_forcing_holds_at_ambient(self):
        # Zero wind, zero noise, constant ambient: no power, temps pinned.
        farm, failures = simulate_farm(quiet_config())
        assert failures == []
        t = farm.turbines[0]
        assert np.all(t.channels["active_power"] == 0.0)
        for name in ("gearbox_ims_bearing_temp", "gearbox_hss_bearing_temp"):
            gap = np.abs(t.channels[name] - QUIET_ENV.mean_ambient)
            assert gap.max() < 1e-9
            assert np.all(np.diff(gap) <= 1e-12)

    def test_bit_identical_rerun(self):
        a, _ = simulate_farm(default_sim_config())
        b, _ = simulate_farm(default_sim_config())
        assert dataset_fingerprint(a) == dataset_fingerprint(b)

    def test_different_seeds_differ(self):
        a, _ = simulate_farm(quiet_config(seed=1, noise=NoiseParams()))
        b, _ = simulate_farm(quiet_config(seed=2, noise=NoiseParams()))
        assert dataset_fingerprint(a) != dataset_fingerprint(b)

    def test_failure_records_match_scenarios(self):
        cfg = default_sim_config()
        _, failures = simulate_farm(cfg)
        assert len(failures) == len(cfg.faults)
        assert {f.component for f in failures} == {GEARBOX_IMS_COMPONENT}
        assert [f.failure_time for f in failures] == sorted(
            f.failure_time for f in cfg.faults
        )

    def test_downtime_rows_absent_and_resume_present(self):
        cfg = default_sim_config()
        farm, failures = simulate_farm(cfg)
        rec = failures[0]
        t = farm.turbine(rec.turbine_id)
        resume = rec.failure_time + cfg.repair_days * SECONDS_PER_DAY
        down = (t.timestamps >= rec.failure_time) & (t.timestamps < resume)
        assert not np.any(down)
        assert np.any(t.timestamps >= resume)
        assert np.any(t.timestamps < rec.failure_time)

    def test_fault_raises_pre_failure_ims_mean(self):
        # Paired healthy twin shares noise, so the window difference is the
        # pure fault deflection.
        cfg = default_sim_config()
        farm, failures = simulate_farm(cfg)
        healthy, _ = simulate_farm(healthy_variant(cfg))
        rec = failures[0]
        faulty_t = farm.turbine(rec.turbine_id)
        healthy_t = healthy.turbine(rec.turbine_id)
        lo = rec.failure_time - 10 * SECONDS_PER_DAY
        m_f = (faulty_t.timestamps >= lo) & (faulty_t.timestamps < rec.failure_time)
        m_h = (healthy_t.timestamps >= lo) & (
            healthy_t.timestamps < rec.failure_time
        )
        delta = (
            faulty_t.channels["gearbox_ims_bearing_temp"][m_f].mean()
            - healthy_t.channels["gearbox_ims_bearing_temp"][m_h].mean()
        )
        assert delta > 1.0

    def test_noise_paired_across_fault_variants(self):
        cfg = default_sim_config()
        farm, _ = simulate_farm(cfg)
        healthy, _ = simulate_farm(healthy_variant(cfg))
        for tid in cfg.turbine_ids:
            f_t = farm.turbine(tid)
            h_t = healthy.turbine(tid)
            common = np.isin(h_t.timestamps, f_t.timestamps)
            assert np.array_equal(
                f_t.channels["wind_speed"], h_t.channels["wind_speed"][common]
            )
            assert np.array_equal(
                f_t.channels["ambient_temp"], h_t.channels["ambient_temp"][common]
            )

    def test_decoupled_hss_carries_no_fault_signature(self):
        # With h = 0 the HSS node never sees IMS heat: its channel matches
        # the healthy twin to rounding error (the sum/difference modes are
        # filtered separately, so cancellation is not bitwise), while the
        # IMS channel is strictly hotter approaching failure.
        cfg = default_sim_config()
        cfg = SimConfig(
            seed=cfg.seed,
            n_turbines=cfg.n_turbines,
            period=cfg.period,
            params=TurbineParams(h=0.0),
            faults=cfg.faults,
        )
        farm, failures = simulate_farm(cfg)
        healthy, _ = simulate_farm(healthy_variant(cfg))
        rec = failures[0]
        f_t = farm.turbine(rec.turbine_id)
        h_t = healthy.turbine(rec.turbine_id)
        # Post-repair rows restart from a cold state the healthy twin never
        # saw, so only pre-failure rows are comparable.
        common = np.isin(h_t.timestamps, f_t.timestamps)
        pre = (f_t.timestamps >= rec.failure_time - 10 * SECONDS_PER_DAY) & (
            f_t.timestamps < rec.failure_time
        )
        hss_delta = (
            f_t.channels["gearbox_hss_bearing_temp"][pre]
            - h_t.channels["gearbox_hss_bearing_temp"][common][pre]
        )
        assert np.abs(hss_delta).max() < 1e-9
        d_ims = (
            f_t.channels["gearbox_ims_bearing_temp"][pre].mean()
            - h_t.channels["gearbox_ims_bearing_temp"][common][pre].mean()
        )
        assert d_ims > 1.0

    def test_fault_on_unknown_turbine_rejected(self):
        with pytest.raises(ConfigError, match="unknown turbine"):
            quiet_config(
                faults=(FaultScenario("T09", T2010 + 3600 * 12),)
            )

    def test_overlapping_faults_on_one_turbine_rejected(self):
        day = SECONDS_PER_DAY
        with pytest.raises(ConfigError, match="overlaps"):
            SimConfig(
                seed=1,
                n_turbines=1,
                period=TimeInterval(T2010, T2010 + 400 * day),
                faults=(
                    FaultScenario("T01", T2010 + 100 * day),
                    FaultScenario("T01", T2010 + 150 * day),
                ),
            )

    def test_misaligned_period_rejected(self):
        with pytest.raises(ConfigError, match="resolution"):
            SimConfig(
                seed=1,
                n_turbines=1,
                period=TimeInterval(T2010 + 1, T2010 + SECONDS_PER_DAY),
            )


class TestScenarioGrammar:
    def test_round_trip_default_config(self):
        cfg = default_sim_config()
        assert sim_config_from_dict(sim_config_to_dict(cfg)) == cfg

    def test_unknown_top_level_key_rejected(self):
        data = sim_config_to_dict(default_sim_config())
        data["turbines"] = 5
        with pytest.raises(ConfigError, match="unknown keys"):
            sim_config_from_dict(data)

    def test_unknown_params_key_rejected(self):
        data = sim_config_to_dict(default_sim_config())
        data["params"]["rated_rpm"] = 16
        with pytest.raises(ConfigError, match="scenario.params"):
            sim_config_from_dict(data)

    def test_missing_seed_rejected(self):
        data = sim_config_to_dict(default_sim_config())
        del data["seed"]
        with pytest.raises(ConfigError, match="seed"):
            sim_config_from_dict(data)

    def test_bad_fault_timestamp_rejected(self):
        data = sim_config_to_dict(default_sim_config())
        data["faults"][0]["failure_time"] = "March 2012"
        with pytest.raises(ConfigError, match=r"faults\[0\]"):
            sim_config_from_dict(data)

    def test_file_round_trip(self, tmp_path):
        import json

        cfg = default_sim_config()
        path = tmp_path / "scenario.json"
        path.write_text(json.dumps(sim_config_to_dict(cfg)))
        assert load_scenario_file(path) == cfg

    def test_malformed_json_reports_line(self, tmp_path):
        path = tmp_path / "scenario.json"
        path.write_text('{\n "seed": 1,\n}\n')
        with pytest.raises(ConfigError, match="line 3"):
            load_scenario_file(path)
