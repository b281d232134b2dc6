"""Finite-volume drying simulator: closures, stepping, conservation."""
import dataclasses

import numpy as np
import pytest
from scipy.special import erfc, erfcx

from omdc import dryer
from omdc.exceptions import NumericalError, RangeError, StabilityError

PARAMS = dryer.MaterialParams()


def small_config(**overrides):
    base = dict(
        grid=dryer.Grid(6, 6, 6, 0.005, 0.01, 0.02),
        material=PARAMS,
        schedule=dryer.AmbientSchedule(
            temperature_breaks=((0.0, 375.0),),
            vapor_breaks=((0.0, 0.035), (100.0, 0.0175), (200.0, 0.007)),
        ),
        dt=0.1,
        t_end=50.0,
        sample_interval=12.5,
        initial_temperature=298.15,
        initial_moisture=0.8,
    )
    base.update(overrides)
    return dryer.DryerConfig(**base)


# ---------------------------------------------------------------------------
# closures


def test_saturated_surface_density_at_freezing_point():
    # Magnus pressure is 611.2 Pa at 0 degC; ideal-gas conversion
    rho = dryer.surface_vapor_density(np.float64(273.15), np.float64(0.5), PARAMS)
    expected = 611.2 * 0.018015 / (8.314462618 * 273.15)
    assert float(rho) == pytest.approx(expected, rel=1e-6)
    assert expected == pytest.approx(4.85e-3, rel=2e-3)


def test_dry_surface_emits_nothing():
    rho = dryer.surface_vapor_density(np.float64(320.0), np.float64(0.0), PARAMS)
    assert float(rho) == 0.0


def test_vapor_density_increases_with_temperature():
    t = np.linspace(274.0, 399.0, 60)
    rho = dryer.surface_vapor_density(t, np.full_like(t, 0.5), PARAMS)
    assert np.all(np.diff(rho) > 0)


def test_activity_saturates_at_fiber_saturation():
    wet = dryer.surface_vapor_density(np.float64(330.0), np.float64(0.3), PARAMS)
    wetter = dryer.surface_vapor_density(np.float64(330.0), np.float64(0.7), PARAMS)
    half = dryer.surface_vapor_density(np.float64(330.0), np.float64(0.15), PARAMS)
    assert float(wet) == pytest.approx(float(wetter))
    assert float(half) == pytest.approx(0.5 * float(wet), rel=1e-12)


def test_vapor_density_range_guard():
    with pytest.raises(RangeError):
        dryer.surface_vapor_density(np.float64(200.0), np.float64(0.5), PARAMS)
    with pytest.raises(RangeError):
        dryer.surface_vapor_density(np.float64(460.0), np.float64(0.5), PARAMS)


def test_latent_heat_reference_values():
    assert PARAMS.latent_heat(np.float64(273.15)) == pytest.approx(2.501e6)
    assert PARAMS.latent_heat(np.float64(373.15)) == pytest.approx(2.501e6 - 2430 * 100)


def test_schedule_lookup_and_validation():
    sched = dryer.AmbientSchedule(
        temperature_breaks=((0.0, 375.0),),
        vapor_breaks=((0.0, 0.035), (100.0, 0.0175), (200.0, 0.007)),
    )
    assert sched.vapor_density(0.0) == 0.035
    assert sched.vapor_density(99.9) == 0.035
    assert sched.vapor_density(100.0) == 0.0175
    assert sched.vapor_density(1000.0) == 0.007
    with pytest.raises(NumericalError):
        dryer.AmbientSchedule(temperature_breaks=((10.0, 375.0),))
    with pytest.raises(NumericalError):
        dryer.AmbientSchedule(vapor_breaks=((0.0, 0.035), (0.0, 0.01)))


# ---------------------------------------------------------------------------
# stepping


def test_equilibrium_state_is_a_fixed_point():
    cfg = small_config()
    state = dryer.initial_state(cfg)
    rho_eq = float(
        dryer.surface_vapor_density(
            np.float64(cfg.initial_temperature),
            np.float64(cfg.initial_moisture),
            PARAMS,
        )
    )
    sched = dryer.AmbientSchedule(
        temperature_breaks=((0.0, cfg.initial_temperature),),
        vapor_breaks=((0.0, rho_eq),),
    )
    new = dryer.step(state, sched, PARAMS, cfg.grid, cfg.dt)
    assert np.array_equal(new.temperature, state.temperature)
    assert np.array_equal(new.moisture, state.moisture)


def test_evaporation_cools_and_dries():
    cfg = small_config()
    state = dryer.initial_state(cfg)
    rho_eq = float(
        dryer.surface_vapor_density(np.float64(298.15), np.float64(0.8), PARAMS)
    )
    hot = dryer.AmbientSchedule(
        temperature_breaks=((0.0, 375.0),), vapor_breaks=((0.0, rho_eq),)
    )
    hot_dry = dryer.AmbientSchedule(
        temperature_breaks=((0.0, 375.0),), vapor_breaks=((0.0, 0.0),)
    )
    no_evap = dryer.step(state, hot, PARAMS, cfg.grid, cfg.dt)
    with_evap = dryer.step(state, hot_dry, PARAMS, cfg.grid, cfg.dt)
    assert with_evap.moisture.sum() < no_evap.moisture.sum()
    assert with_evap.temperature.sum() < no_evap.temperature.sum()
    assert no_evap.moisture.sum() == pytest.approx(state.moisture.sum())


def test_drier_air_evaporates_faster():
    cfg = small_config()
    state = dryer.initial_state(cfg)
    losses = []
    for rho_inf in (0.035, 0.0175, 0.007):
        sched = dryer.AmbientSchedule(
            temperature_breaks=((0.0, 375.0),), vapor_breaks=((0.0, rho_inf),)
        )
        new = dryer.step(state, sched, PARAMS, cfg.grid, cfg.dt)
        losses.append(state.moisture.sum() - new.moisture.sum())
    assert losses[0] < losses[1] < losses[2]


def test_no_condensation_by_default():
    # ambient far above the surface equilibrium would push water in;
    # the flux is floored at zero instead
    cfg = small_config()
    state = dryer.initial_state(cfg)
    humid = dryer.AmbientSchedule(
        temperature_breaks=((0.0, 298.15),), vapor_breaks=((0.0, 1.0),)
    )
    new = dryer.step(state, humid, PARAMS, cfg.grid, cfg.dt)
    assert new.moisture.sum() == pytest.approx(state.moisture.sum())
    condensing = dataclasses.replace(PARAMS, allow_condensation=True)
    wet = dryer.step(state, humid, condensing, cfg.grid, cfg.dt)
    assert wet.moisture.sum() > state.moisture.sum()


def test_step_rejects_unstable_dt():
    cfg = small_config()
    state = dryer.initial_state(cfg)
    with pytest.raises(StabilityError):
        dryer.step(state, cfg.schedule, PARAMS, cfg.grid, 60.0)


def test_pure_conduction_respects_extremes():
    # bone-dry chip, so the energy balance is conduction only
    cfg = small_config(initial_moisture=0.0, t_end=25.0)
    snap = dryer.simulate(cfg)
    n = cfg.grid.n_cells
    temps = snap.s[n:]
    assert temps.min() >= 298.15 - 1e-9
    assert temps.max() <= 375.0 + 1e-9


def test_insulated_box_never_changes():
    cfg = small_config(active_faces=(), t_end=5.0, sample_interval=2.5)
    snap = dryer.simulate(cfg)
    assert np.allclose(snap.s[: cfg.grid.n_cells], 0.8, atol=1e-14)
    assert np.allclose(snap.s[cfg.grid.n_cells :], 298.15, atol=1e-12)


def test_conduction_matches_semi_infinite_slab():
    # single heated face, no moisture: the cell-center profile must track
    # the analytic convective-boundary solution; first-order in dx, so
    # the coarse grid sits farther from the oracle than the fine one
    errs = {}
    for nx, dt in ((100, 2e-2), (400, 5e-3)):
        lx, t_end = 0.02, 10.0
        grid = dryer.Grid(nx, 1, 1, lx, 0.005, 0.005)
        cfg = dryer.DryerConfig(
            grid=grid,
            material=PARAMS,
            schedule=dryer.AmbientSchedule(
                temperature_breaks=((0.0, 350.0),), vapor_breaks=((0.0, 0.0),)
            ),
            dt=dt,
            t_end=t_end,
            sample_interval=t_end,
            initial_temperature=298.15,
            initial_moisture=0.0,
            active_faces=("x-",),
        )
        snap = dryer.simulate(cfg)
        t_num = snap.s[grid.n_cells :, -1]
        xc = (np.arange(nx) + 0.5) * (lx / nx)
        kappa = PARAMS.lambda_dry / (PARAMS.rho_dry * PARAMS.cp_dry)
        h_over_k = PARAMS.alpha / PARAMS.lambda_dry
        sqt = np.sqrt(kappa * t_end)
        xi = xc / (2.0 * sqt)
        theta = erfc(xi) - erfcx(xi + h_over_k * sqt) * np.exp(-(xi**2))
        t_ana = 298.15 + (350.0 - 298.15) * theta
        errs[nx] = np.abs(t_num - t_ana).max() / (350.0 - 298.15)
    assert errs[400] <= 0.01
    assert errs[400] < errs[100]


# ---------------------------------------------------------------------------
# full runs


def test_zero_duration_run_returns_initial_state():
    cfg = small_config(t_end=0.0)
    snap = dryer.simulate(cfg)
    assert snap.s.shape == (2 * cfg.grid.n_cells, 1)
    assert snap.u.shape == (2, 0)
    n = cfg.grid.n_cells
    assert np.allclose(snap.s[:n, 0], 0.8)
    assert np.allclose(snap.s[n:, 0], 298.15)


def test_snapshot_layout_and_inputs():
    cfg = small_config()
    snap = dryer.simulate(cfg)
    n = cfg.grid.n_cells
    assert snap.s.shape == (2 * n, 5)
    assert snap.u.shape == (2, 4)
    assert [f.name for f in snap.field_layout] == ["moisture", "temperature"]
    assert snap.field("moisture").stop == n
    assert snap.dt_sample == 12.5
    # inputs are the ambient values held over each interval
    assert np.allclose(snap.u[0], 375.0)
    assert np.allclose(snap.u[1], 0.035)


def test_moisture_only_ever_decreases():
    snap = dryer.simulate(small_config(t_end=100.0))
    n = snap.s.shape[0] // 2
    water = snap.s[:n].sum(axis=0)
    assert np.all(np.diff(water) <= 1e-12 * water[0])
    assert snap.s[:n].min() >= -1e-15


def test_per_step_conservation(tmp_path):
    snap, audit = dryer.simulate_with_audit(small_config())
    assert audit.max_step_water_residual_rel <= 1e-8
    assert audit.water_residual_rel <= 1e-8
    assert audit.energy_residual_rel <= 1e-8
    assert audit.n_steps == 500
    assert audit.wall_time_s > 0
    payload = audit.to_dict()
    assert payload["n_steps"] == 500


def test_grid_refinement_consistency(drying_snapshots):
    coarse_cfg = dryer.DryerConfig(grid=dryer.Grid(10, 10, 10, 0.005, 0.01, 0.02))
    coarse = dryer.simulate(coarse_cfg)
    for snap, n in ((drying_snapshots, 8000), (coarse, 1000)):
        assert snap.s.shape[0] == 2 * n
    fine_n = 8000
    coarse_n = 1000
    for block in ("moisture", "temperature"):
        f = drying_snapshots.field(block)
        c = coarse.field(block)
        fine_mean = drying_snapshots.s[f.start : f.stop].mean(axis=0)
        coarse_mean = coarse.s[c.start : c.stop].mean(axis=0)
        gap = np.sqrt(np.mean((fine_mean - coarse_mean) ** 2))
        scale = np.sqrt(np.mean(fine_mean**2))
        assert gap / scale < 0.02


def test_config_json_round_trip():
    cfg = small_config(t_end=25.0)
    payload = cfg.to_dict()
    back = dryer.config_from_dict(payload)
    assert back == cfg
    # partial override keeps everything else
    tweaked = dryer.config_from_dict({"dt": 0.05}, base=cfg)
    assert tweaked.dt == 0.05
    assert tweaked.grid == cfg.grid
    assert tweaked.schedule == cfg.schedule


def test_config_validates_sampling_alignment():
    with pytest.raises(NumericalError):
        small_config(sample_interval=12.55)  # not a multiple of dt
    with pytest.raises(NumericalError):
        # 51.3 s divides into steps but not into sampling windows
        dryer.simulate(small_config(t_end=51.3))


def test_default_config_matches_published_setup():
    cfg = dryer.default_config()
    assert cfg.grid.shape == (20, 20, 20)
    assert (cfg.grid.lx, cfg.grid.ly, cfg.grid.lz) == (0.005, 0.01, 0.02)
    assert cfg.dt == 0.1
    assert cfg.t_end == 1250.0
    assert cfg.sample_interval == 12.5
    assert cfg.schedule.vapor_breaks == ((0.0, 0.035), (100.0, 0.0175), (200.0, 0.007))
    assert cfg.schedule.temperature_breaks == ((0.0, 375.0),)
