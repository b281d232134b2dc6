"""Finite-volume simulation of convective wood-chip drying.

A rectangular chip is discretized into uniform cells carrying two
fields: temperature T (K) and dry-basis moisture content X (kg water
per kg dry wood). Inside the chip both fields diffuse:

    C(X) dT/dt = div(lambda grad T),   C(X) = rho_dry (cp_dry + cp_w X)
    dX/dt      = div(delta(T) grad X)

with moisture diffusivity following an Arrhenius law in temperature.
At active surfaces, air at T_amb with vapor density rho_amb drives
evaporation ``m = beta (rho_s - rho_amb)`` (floored at zero) and heat
transfer ``q = alpha (T_amb - T) - dh(T) m``, where rho_s is the
equilibrium vapor density at the surface and dh the latent heat.

Time integration is explicit Euler with a stability guard. The scheme
is written in flux form, so total water and energy balances close to
rounding error; the simulator tracks both as a built-in audit.
"""

import time as _time
from dataclasses import asdict, dataclass, field, replace

import numpy as np

from .exceptions import (
    DimensionMismatchError,
    NumericalError,
    RangeError,
    StabilityError,
)
from .store import FieldSpan, SnapshotSet

ALL_FACES = ("x-", "x+", "y-", "y+", "z-", "z+")
_FACE_AXIS = {"x": 0, "y": 1, "z": 2}

KELVIN_OFFSET = 273.15
GAS_CONSTANT = 8.314462618
WATER_MOLAR_MASS = 0.018015
SURFACE_T_RANGE = (250.0, 450.0)


@dataclass(frozen=True)
class Grid:
    """Uniform rectangular grid: counts per axis and box side lengths (m)."""

    nx: int
    ny: int
    nz: int
    lx: float
    ly: float
    lz: float

    def __post_init__(self):
        if min(self.nx, self.ny, self.nz) < 1:
            raise DimensionMismatchError("grid needs at least one cell per axis")
        if min(self.lx, self.ly, self.lz) <= 0:
            raise DimensionMismatchError("box side lengths must be positive")

    @property
    def shape(self):
        return (self.nx, self.ny, self.nz)

    @property
    def n_cells(self):
        return self.nx * self.ny * self.nz

    @property
    def spacing(self):
        return (self.lx / self.nx, self.ly / self.ny, self.lz / self.nz)

    @property
    def cell_volume(self):
        dx, dy, dz = self.spacing
        return dx * dy * dz


@dataclass(frozen=True)
class MaterialParams:
    """Dry-wood properties and surface-exchange closure constants.

    delta_eff is the moisture diffusivity at delta_ref_temp; it grows
    with temperature as exp(delta_activation_temp (1/T_ref - 1/T)).
    Water activity falls linearly below the fiber saturation moisture.
    """

    rho_dry: float = 500.0
    cp_dry: float = 1500.0
    lambda_dry: float = 0.12
    delta_eff: float = 2e-9
    alpha: float = 45.0
    beta: float = 0.075
    cp_water: float = 4186.0
    latent_ref: float = 2.501e6
    latent_slope: float = 2430.0
    fiber_saturation: float = 0.3
    delta_activation_temp: float = 4000.0
    delta_ref_temp: float = 275.0
    aniso_lambda: tuple = (1.0, 1.0, 1.0)
    aniso_delta: tuple = (1.0, 1.0, 1.0)
    allow_condensation: bool = False

    def __post_init__(self):
        for name in (
            "rho_dry",
            "cp_dry",
            "lambda_dry",
            "delta_eff",
            "alpha",
            "beta",
            "cp_water",
            "fiber_saturation",
            "delta_ref_temp",
        ):
            if not getattr(self, name) > 0:
                raise NumericalError(f"{name} must be positive")
        object.__setattr__(self, "aniso_lambda", tuple(self.aniso_lambda))
        object.__setattr__(self, "aniso_delta", tuple(self.aniso_delta))
        for t in (self.aniso_lambda, self.aniso_delta):
            if len(t) != 3 or min(t) <= 0:
                raise NumericalError("anisotropy factors must be 3 positive values")

    def heat_capacity(self, x_field):
        """Volumetric heat capacity C(X) in J/(m^3 K)."""
        return self.rho_dry * (self.cp_dry + self.cp_water * x_field)

    def latent_heat(self, t_field):
        """Heat of vaporization in J/kg at temperature T."""
        return self.latent_ref - self.latent_slope * (t_field - KELVIN_OFFSET)

    def moisture_diffusivity(self, t_field):
        """Arrhenius diffusivity delta(T) in m^2/s."""
        return self.delta_eff * np.exp(
            self.delta_activation_temp * (1.0 / self.delta_ref_temp - 1.0 / t_field)
        )


@dataclass(frozen=True)
class AmbientSchedule:
    """Piecewise-constant drying air: (start time, value) breakpoints."""

    temperature_breaks: tuple = ((0.0, 375.0),)
    vapor_breaks: tuple = ((0.0, 0.035),)

    def __post_init__(self):
        for name in ("temperature_breaks", "vapor_breaks"):
            breaks = tuple((float(t), float(v)) for t, v in getattr(self, name))
            object.__setattr__(self, name, breaks)
            if not breaks or breaks[0][0] != 0.0:
                raise NumericalError(f"{name} must start at time 0")
            times = [t for t, _ in breaks]
            if any(b <= a for a, b in zip(times, times[1:])):
                raise NumericalError(f"{name} times must increase strictly")

    def temperature(self, t):
        return _piecewise(self.temperature_breaks, t)

    def vapor_density(self, t):
        return _piecewise(self.vapor_breaks, t)


def _piecewise(breaks, t):
    for tb, vb in reversed(breaks):
        if t >= tb:
            return vb
    raise NumericalError(f"schedule queried before first breakpoint: t = {t}")


@dataclass(frozen=True)
class DryerState:
    """Fields on the grid at one instant."""

    time: float
    temperature: np.ndarray
    moisture: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.temperature, dtype=np.float64)
        x = np.asarray(self.moisture, dtype=np.float64)
        if t.shape != x.shape or t.ndim != 3:
            raise DimensionMismatchError(
                f"fields must share a 3-D shape, got {t.shape} and {x.shape}"
            )
        if not (np.isfinite(t).all() and np.isfinite(x).all()):
            raise NumericalError("non-finite field values")
        object.__setattr__(self, "temperature", t)
        object.__setattr__(self, "moisture", x)


def saturation_pressure(t_field):
    """Saturation vapor pressure (Pa) by the Magnus fit."""
    theta = np.asarray(t_field) - KELVIN_OFFSET
    return 611.2 * np.exp(17.62 * theta / (243.12 + theta))


def surface_vapor_density(t_field, x_field, params):
    """Equilibrium vapor density (kg/m^3) at a wood surface.

    Water activity is X / fiber_saturation capped at 1 (and floored at
    0 for nonphysical negative moisture). Temperatures must stay inside
    the fit's validity window.
    """
    t = np.asarray(t_field, dtype=np.float64)
    lo, hi = SURFACE_T_RANGE
    if t.size and (t.min() < lo or t.max() > hi):
        raise RangeError(
            f"surface temperature outside ({lo}, {hi}) K: "
            f"range [{t.min():.2f}, {t.max():.2f}]"
        )
    activity = np.clip(np.asarray(x_field) / params.fiber_saturation, 0.0, 1.0)
    p_w = activity * saturation_pressure(t)
    return p_w * WATER_MOLAR_MASS / (GAS_CONSTANT * t)


def _axis_divergence(field_a, coeff, d, axis):
    """Divergence of coeff * grad(field) along one axis, flux form.

    coeff may be a scalar or a per-cell array; per-cell values are
    combined across faces by the harmonic mean.
    """
    lo = [slice(None)] * 3
    hi = [slice(None)] * 3
    lo[axis] = slice(0, -1)
    hi[axis] = slice(1, None)
    lo, hi = tuple(lo), tuple(hi)
    if np.ndim(coeff) == 0:
        cf = coeff
    else:
        a, b = coeff[lo], coeff[hi]
        cf = 2.0 * a * b / (a + b)
    g = cf * (field_a[hi] - field_a[lo]) / d
    out = np.zeros_like(field_a)
    out[lo] += g / d
    out[hi] -= g / d
    return out


def _face_index(face, shape):
    kind, side = face[0], face[1]
    axis = _FACE_AXIS[kind]
    idx = [slice(None)] * 3
    idx[axis] = 0 if side == "-" else shape[axis] - 1
    return axis, tuple(idx)


def _check_stability(dt, grid, params, t_field, x_field):
    d = grid.spacing
    c_min = params.rho_dry * (params.cp_dry + params.cp_water * max(x_field.min(), 0.0))
    a_heat = params.lambda_dry * max(params.aniso_lambda) / c_min
    a_moist = float(
        params.moisture_diffusivity(t_field.max()) * max(params.aniso_delta)
    )
    bound = 0.4 * min(dd * dd for dd in d) / max(a_heat, a_moist)
    if dt > bound:
        raise StabilityError(
            f"dt = {dt} exceeds the explicit stability bound {bound:.4e}"
        )


def _advance(state, schedule, params, grid, dt, active_faces):
    """One explicit Euler step; returns (state, water_out_kg, heat_in_J)."""
    t_f, x_f = state.temperature, state.moisture
    if t_f.shape != grid.shape:
        raise DimensionMismatchError(
            f"state shape {t_f.shape} does not match grid {grid.shape}"
        )
    if not dt > 0:
        raise NumericalError(f"dt must be positive, got {dt}")
    _check_stability(dt, grid, params, t_f, x_f)

    t_amb = schedule.temperature(state.time)
    rho_amb = schedule.vapor_density(state.time)
    spacing = grid.spacing
    cap = params.heat_capacity(x_f)
    delta = params.moisture_diffusivity(t_f)

    heat_div = np.zeros_like(t_f)
    moist_div = np.zeros_like(x_f)
    for axis in range(3):
        if grid.shape[axis] > 1:
            heat_div += _axis_divergence(
                t_f, params.lambda_dry * params.aniso_lambda[axis], spacing[axis], axis
            )
            moist_div += _axis_divergence(
                x_f, delta * params.aniso_delta[axis], spacing[axis], axis
            )

    dT = heat_div / cap
    dX = moist_div
    water_out = 0.0
    heat_in = 0.0
    face_area = {
        0: spacing[1] * spacing[2],
        1: spacing[0] * spacing[2],
        2: spacing[0] * spacing[1],
    }
    for face in active_faces:
        axis, idx = _face_index(face, grid.shape)
        t_s = t_f[idx]
        x_s = x_f[idx]
        half = 0.5 * spacing[axis]
        lam = params.lambda_dry * params.aniso_lambda[axis]
        rho_s = surface_vapor_density(t_s, x_s, params)
        # The exchange laws hold at the face, not the cell center.
        # Eliminating the face state against half-cell conduction and
        # diffusion turns the coefficients into series conductances, so
        # the surface evaluation stays consistent under grid refinement.
        slope = np.where(
            x_s < params.fiber_saturation,
            saturation_pressure(t_s)
            * WATER_MOLAR_MASS
            / (GAS_CONSTANT * t_s * params.fiber_saturation),
            0.0,
        )
        g_int = params.rho_dry * delta[idx] * params.aniso_delta[axis] / half
        m_flux = (rho_s - rho_amb) / (1.0 / params.beta + slope / g_int)
        if not params.allow_condensation:
            m_flux = np.maximum(m_flux, 0.0)
        q = (params.alpha * (t_amb - t_s) - params.latent_heat(t_s) * m_flux) / (
            1.0 + params.alpha * half / lam
        )
        inv_d = 1.0 / spacing[axis]
        dT[idx] += q * inv_d / cap[idx]
        dX[idx] -= m_flux * inv_d / params.rho_dry
        water_out += float(m_flux.sum()) * face_area[axis] * dt
        heat_in += float(q.sum()) * face_area[axis] * dt

    new = DryerState(
        time=state.time + dt,
        temperature=t_f + dt * dT,
        moisture=x_f + dt * dX,
    )
    return new, water_out, heat_in


def step(state, schedule, params, grid, dt, active_faces=ALL_FACES):
    """Advance the fields by one explicit time step."""
    new, _, _ = _advance(state, schedule, params, grid, dt, active_faces)
    return new


# ---------------------------------------------------------------------------
# full runs


@dataclass(frozen=True)
class DryerConfig:
    """Everything one run needs; JSON-serializable via to_dict/from_dict."""

    grid: Grid = Grid(20, 20, 20, 0.005, 0.01, 0.02)
    material: MaterialParams = MaterialParams()
    schedule: AmbientSchedule = AmbientSchedule(
        temperature_breaks=((0.0, 375.0),),
        vapor_breaks=((0.0, 0.035), (100.0, 0.0175), (200.0, 0.007)),
    )
    dt: float = 0.1
    t_end: float = 1250.0
    sample_interval: float = 12.5
    initial_temperature: float = 298.15
    initial_moisture: float = 0.8
    active_faces: tuple = ALL_FACES

    def __post_init__(self):
        object.__setattr__(self, "active_faces", tuple(self.active_faces))
        for f in self.active_faces:
            if f not in ALL_FACES:
                raise NumericalError(f"unknown face {f!r}")
        if len(set(self.active_faces)) != len(self.active_faces):
            raise NumericalError("duplicate face in active_faces")
        if not self.dt > 0:
            raise NumericalError("dt must be positive")
        if self.t_end < 0:
            raise NumericalError("t_end must be nonnegative")
        if not self.sample_interval > 0:
            raise NumericalError("sample_interval must be positive")
        for value, name in (
            (self.t_end / self.dt, "t_end / dt"),
            (self.sample_interval / self.dt, "sample_interval / dt"),
        ):
            if abs(value - round(value)) > 1e-9 * max(1.0, value):
                raise NumericalError(f"{name} must be an integer, got {value}")

    def to_dict(self):
        return {
            "grid": asdict(self.grid),
            "material": asdict(self.material),
            "schedule": {
                "temperature_breaks": [list(b) for b in self.schedule.temperature_breaks],
                "vapor_breaks": [list(b) for b in self.schedule.vapor_breaks],
            },
            "dt": self.dt,
            "t_end": self.t_end,
            "sample_interval": self.sample_interval,
            "initial_temperature": self.initial_temperature,
            "initial_moisture": self.initial_moisture,
            "active_faces": list(self.active_faces),
        }


def config_from_dict(payload, base=None):
    """Build a config from a (possibly partial) dict of overrides."""
    cfg = base or DryerConfig()
    kwargs = {}
    if "grid" in payload:
        kwargs["grid"] = replace(cfg.grid, **payload["grid"]) if isinstance(
            payload["grid"], dict
        ) else payload["grid"]
    if "material" in payload:
        mat = payload["material"]
        if isinstance(mat, dict):
            mat = {
                k: tuple(v) if isinstance(v, list) else v for k, v in mat.items()
            }
            mat = replace(cfg.material, **mat)
        kwargs["material"] = mat
    if "schedule" in payload:
        sch = payload["schedule"]
        if isinstance(sch, dict):
            sch = AmbientSchedule(
                temperature_breaks=tuple(
                    tuple(b) for b in sch.get(
                        "temperature_breaks", cfg.schedule.temperature_breaks
                    )
                ),
                vapor_breaks=tuple(
                    tuple(b) for b in sch.get("vapor_breaks", cfg.schedule.vapor_breaks)
                ),
            )
        kwargs["schedule"] = sch
    for name in (
        "dt",
        "t_end",
        "sample_interval",
        "initial_temperature",
        "initial_moisture",
    ):
        if name in payload:
            kwargs[name] = float(payload[name])
    if "active_faces" in payload:
        kwargs["active_faces"] = tuple(payload["active_faces"])
    return replace(cfg, **kwargs)


def default_config():
    """Reference drying scenario used throughout the tests and CLI."""
    return DryerConfig()


def initial_state(config):
    shape = config.grid.shape
    return DryerState(
        time=0.0,
        temperature=np.full(shape, config.initial_temperature),
        moisture=np.full(shape, config.initial_moisture),
    )


@dataclass(frozen=True)
class DryingAudit:
    """Conservation bookkeeping for one run."""

    water_initial_kg: float
    water_final_kg: float
    water_evaporated_kg: float
    water_residual_rel: float
    max_step_water_residual_rel: float
    heat_in_j: float
    sensible_j: float
    energy_residual_rel: float
    n_steps: int
    wall_time_s: float

    @property
    def per_step_ms(self):
        return 1e3 * self.wall_time_s / max(1, self.n_steps)

    def to_dict(self):
        d = asdict(self)
        d["per_step_ms"] = self.per_step_ms
        return d


def simulate_with_audit(config=None):
    """Run a drying scenario, returning snapshots plus the audit.

    The snapshot state stacks the flattened moisture field over the
    flattened temperature field; inputs are the ambient temperature and
    vapor density held over each sampling window.
    """
    config = config or default_config()
    t0 = _time.perf_counter()
    grid, params, schedule = config.grid, config.material, config.schedule
    n_steps = round(config.t_end / config.dt)
    sample_every = round(config.sample_interval / config.dt)
    if n_steps % sample_every:
        raise NumericalError(
            f"t_end must be a multiple of sample_interval, got "
            f"{config.t_end} and {config.sample_interval}"
        )
    n_samples = n_steps // sample_every + 1
    nc = grid.n_cells

    state = initial_state(config)
    s = np.empty((2 * nc, n_samples))
    cell_v = grid.cell_volume

    def record(col, st):
        s[:nc, col] = st.moisture.ravel()
        s[nc:, col] = st.temperature.ravel()

    record(0, state)
    water0 = params.rho_dry * cell_v * float(state.moisture.sum())
    water_prev = water0
    evap_total = 0.0
    heat_total = 0.0
    sensible_total = 0.0
    max_step_resid = 0.0
    col = 1
    for k in range(n_steps):
        cap = params.heat_capacity(state.moisture)
        new, water_out, heat_in = _advance(
            state, schedule, params, grid, config.dt, config.active_faces
        )
        evap_total += water_out
        heat_total += heat_in
        sensible_total += float(
            (cap * (new.temperature - state.temperature)).sum()
        ) * cell_v
        water_now = params.rho_dry * cell_v * float(new.moisture.sum())
        step_resid = abs((water_prev - water_now) - water_out) / max(water0, 1e-300)
        max_step_resid = max(max_step_resid, step_resid)
        water_prev = water_now
        state = DryerState(
            time=(k + 1) * config.dt,
            temperature=new.temperature,
            moisture=new.moisture,
        )
        if (k + 1) % sample_every == 0:
            record(col, state)
            col += 1

    times = np.arange(n_samples - 1) * config.sample_interval
    u = np.vstack(
        [
            [schedule.temperature(t) for t in times],
            [schedule.vapor_density(t) for t in times],
        ]
    ) if n_samples > 1 else np.zeros((2, 0))

    layout = (
        FieldSpan("moisture", 0, nc),
        FieldSpan("temperature", nc, 2 * nc),
    )
    snap = SnapshotSet(
        s=s,
        u=u,
        dt_sample=config.sample_interval,
        field_layout=layout,
    )
    water_final = water_prev
    audit = DryingAudit(
        water_initial_kg=water0,
        water_final_kg=water_final,
        water_evaporated_kg=evap_total,
        water_residual_rel=abs((water0 - water_final) - evap_total)
        / max(abs(evap_total), 1e-6 * water0, 1e-300),
        max_step_water_residual_rel=max_step_resid,
        heat_in_j=heat_total,
        sensible_j=sensible_total,
        energy_residual_rel=abs(sensible_total - heat_total)
        / max(abs(heat_total), abs(sensible_total), 1e-300),
        n_steps=n_steps,
        wall_time_s=_time.perf_counter() - t0,
    )
    return snap, audit


def simulate(config=None):
    """Run a drying scenario and return its SnapshotSet."""
    snap, _ = simulate_with_audit(config)
    return snap
