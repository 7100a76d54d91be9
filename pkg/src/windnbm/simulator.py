"""Seeded synthetic wind farm with injectable bearing faults.

The generator reproduces the causal structure the detection pipeline relies
on: operating-regime channels (wind, power, rotor speed, pitch, ambient) drive
the gearbox IMS bearing temperature; the neighbouring HSS bearing is coupled
to it by heat transfer, so it mirrors fault heat without receiving any; faults
are efficiency losses that inject extra friction heat into the IMS node only.

Temperatures follow a discrete two-node linear model per 10-minute step:

    T_ims' = T_ims + a_ims * power * fault_mult + h * (T_hss - T_ims)
                   + c * (ambient_eff - T_ims)
    T_hss' = T_hss + a_hss * power + h * (T_ims - T_hss)
                   + c * (ambient_eff - T_hss)

where ``ambient_eff`` is the outdoor ambient plus an unmeasured slow AR(1)
nacelle-interior deviation. Both bearings carry that deviation, but no input
channel does. Output power is derated in hot weather (thermal_power_cap),
which pins the warm-season temperature maxima to the derating knee.
Measurement noise is added after the dynamics, so the dynamics stay
deterministic and testable. Every random draw happens on the full time grid
before downtime rows are dropped, so runs that differ only in their fault
list share noise sample by sample.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, fields, replace
from typing import Iterable, Sequence

import numpy as np
from scipy.signal import lfilter

from .errors import ConfigError, DataError
from .scada import (
    CHANNEL_NAMES,
    SECONDS_PER_DAY,
    FailureRecord,
    FarmDataset,
    TimeInterval,
    TurbineSeries,
    parse_rfc3339,
)

YEAR_SECONDS = int(365.25 * SECONDS_PER_DAY)

#: Component label attached to every simulated failure.
GEARBOX_IMS_COMPONENT = "gearbox_ims_bearing"

# Rotor and pitch regulation constants (causal channels, no target feedback).
ROTOR_MIN_RPM = 6.0
ROTOR_MAX_RPM = 16.0
PITCH_DEG_PER_MS = 2.0
PITCH_MAX_DEG = 25.0
PITCH_FEATHERED_DEG = 90.0


@dataclass(frozen=True)
class TurbineParams:
    """Power-curve and thermal constants of one turbine model.

    Thermal gains are degrees Celsius per kW per step; ``h`` couples the two
    bearing nodes and ``c`` couples each node to ambient, both as per-step
    fractions. Stability of the discrete update requires h + c < 1.
    """

    cut_in: float = 3.0
    rated: float = 12.0
    cut_out: float = 25.0
    rated_power: float = 2000.0
    # Fast ambient coupling keeps the bearings close to the steady state of
    # the prevailing operating point, so instantaneous features can explain
    # the temperature without thermal-memory transients. Node coupling is
    # weak: the HSS bearing picks up only a small share of IMS fault heat,
    # while both nodes share the full nacelle-air common mode.
    a_ims: float = 0.00145
    a_hss: float = 0.00105
    h: float = 0.05
    c: float = 0.30
    # High-temperature derating: output is capped once ambient passes
    # curtail_start, falling linearly to curtail_floor * rated_power at
    # curtail_full. This pins the warm-season temperature maxima to the
    # derating knee instead of letting them track ambient extremes.
    curtail_start: float = 20.0
    curtail_full: float = 25.0
    curtail_floor: float = 0.2

    def __post_init__(self):
        if not (0 < self.cut_in < self.rated < self.cut_out):
            raise ConfigError(
                "wind speeds must satisfy 0 < cut_in < rated < cut_out"
            )
        if self.rated_power <= 0:
            raise ConfigError("rated_power must be positive")
        if self.a_ims <= 0 or self.a_hss <= 0:
            raise ConfigError("thermal gains a_ims, a_hss must be positive")
        if self.h < 0 or self.c <= 0:
            raise ConfigError("coupling must satisfy h >= 0 and c > 0")
        if self.h + self.c >= 1:
            raise ConfigError(
                f"unstable thermal update: h + c = {self.h + self.c} >= 1"
            )
        if self.curtail_start >= self.curtail_full:
            raise ConfigError("curtail_start must lie below curtail_full")
        if not (0 < self.curtail_floor <= 1):
            raise ConfigError("curtail_floor must lie in (0, 1]")


@dataclass(frozen=True)
class EnvironmentParams:
    """Wind, ambient-temperature, and nacelle-disturbance processes.

    Wind is AR(1) around a seasonal/diurnal mean; ambient temperature is a
    seasonal/diurnal cycle plus AR(1) weather noise. The nacelle term is a
    slow temperature deviation around the bearings that no sensor measures:
    it reaches the dynamics through ``ambient_eff`` but never the
    ambient_temp channel.
    """

    # Wind wanders on a multi-week scale, slow against the bearings' thermal
    # response, so temperature excursions are driven by operating point
    # rather than by thermal lag. The seasonal cycle peaks in summer
    # (sea-breeze regime), so full-load operation in warm weather is routine.
    mean_wind: float = 8.5
    wind_ar: float = 0.9997
    wind_sigma: float = 0.033
    wind_seasonal_amp: float = 1.5
    wind_diurnal_amp: float = 0.1
    mean_ambient: float = 12.0
    ambient_seasonal_amp: float = 8.0
    ambient_diurnal_amp: float = 0.8
    ambient_ar: float = 0.995
    ambient_sigma: float = 0.06
    nacelle_ar: float = 0.995
    nacelle_sigma: float = 0.072
    # Anti-condensation heaters cycle in cold weather, so the unmeasured
    # interior deviation swings hardest in winter and is quiet in summer.
    nacelle_seasonal_mod: float = 0.52

    def __post_init__(self):
        for name in ("wind_ar", "ambient_ar", "nacelle_ar"):
            value = getattr(self, name)
            if not (0 <= value < 1):
                raise ConfigError(f"{name} must lie in [0, 1)")
        for name in (
            "wind_sigma",
            "wind_seasonal_amp",
            "wind_diurnal_amp",
            "ambient_seasonal_amp",
            "ambient_diurnal_amp",
            "ambient_sigma",
            "nacelle_sigma",
        ):
            if getattr(self, name) < 0:
                raise ConfigError(f"{name} must be non-negative")
        if not (0 <= self.nacelle_seasonal_mod <= 1):
            raise ConfigError("nacelle_seasonal_mod must lie in [0, 1]")
        if self.mean_wind < 0:
            raise ConfigError("mean_wind must be non-negative")


@dataclass(frozen=True)
class NoiseParams:
    """Per-channel measurement noise standard deviations."""

    wind_speed: float = 0.3
    active_power: float = 15.0
    rotor_speed: float = 0.15
    pitch_angle: float = 0.25
    # Kept small: the bearings respond to ambient with unit steady-state
    # gain, so ambient reading noise would pass straight into residuals,
    # and bearing reading spikes would pass into them one for one.
    ambient_temp: float = 0.1
    gearbox_hss_bearing_temp: float = 0.15
    gearbox_ims_bearing_temp: float = 0.15

    def __post_init__(self):
        for f in fields(self):
            if getattr(self, f.name) < 0:
                raise ConfigError(f"noise sd {f.name} must be non-negative")

    def as_dict(self) -> dict[str, float]:
        return {f.name: float(getattr(self, f.name)) for f in fields(self)}


@dataclass(frozen=True)
class FaultScenario:
    """A progressive IMS bearing fault ending in failure.

    The extra-friction multiplier is 1 before the onset, ramps linearly, and
    reaches 1 + severity at failure_time, when the turbine goes down.
    """

    turbine_id: str
    failure_time: int
    onset_lead_days: int = 60
    severity: float = 0.5

    def __post_init__(self):
        if self.onset_lead_days <= 0:
            raise ConfigError("onset_lead_days must be positive")
        if self.severity <= 0:
            raise ConfigError("severity must be positive")

    @property
    def onset_time(self) -> int:
        return self.failure_time - self.onset_lead_days * SECONDS_PER_DAY


def turbine_id_for(index: int) -> str:
    return f"T{index + 1:02d}"


@dataclass(frozen=True)
class SimConfig:
    """Complete description of one synthetic farm run."""

    seed: int
    n_turbines: int
    period: TimeInterval
    resolution_s: int = 600
    params: TurbineParams = TurbineParams()
    environment: EnvironmentParams = EnvironmentParams()
    noise: NoiseParams = NoiseParams()
    faults: tuple[FaultScenario, ...] = ()
    repair_days: int = 30

    def __post_init__(self):
        object.__setattr__(self, "faults", tuple(self.faults))
        if self.n_turbines < 1:
            raise ConfigError("n_turbines must be at least 1")
        if self.resolution_s <= 0:
            raise ConfigError("resolution_s must be positive")
        if self.repair_days < 0:
            raise ConfigError("repair_days must be non-negative")
        if (
            self.period.start % self.resolution_s != 0
            or self.period.end % self.resolution_s != 0
        ):
            raise ConfigError("period bounds must be multiples of resolution_s")
        known = set(self.turbine_ids)
        per_turbine: dict[str, list[FaultScenario]] = {}
        for f in self.faults:
            if f.turbine_id not in known:
                raise ConfigError(
                    f"fault references unknown turbine {f.turbine_id!r}; "
                    f"simulated ids run {turbine_id_for(0)}.."
                    f"{turbine_id_for(self.n_turbines - 1)}"
                )
            per_turbine.setdefault(f.turbine_id, []).append(f)
        for tid, fs in per_turbine.items():
            fs = sorted(fs, key=lambda f: f.failure_time)
            for prev, nxt in zip(fs, fs[1:]):
                resume = prev.failure_time + self.repair_days * SECONDS_PER_DAY
                if nxt.onset_time < resume:
                    raise ConfigError(
                        f"turbine {tid}: fault starting "
                        f"{nxt.onset_lead_days} days before its failure "
                        "overlaps the previous fault's repair period"
                    )

    @property
    def turbine_ids(self) -> tuple[str, ...]:
        return tuple(turbine_id_for(i) for i in range(self.n_turbines))

    @property
    def n_steps(self) -> int:
        return (self.period.end - self.period.start) // self.resolution_s


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    """Stationary AR(1) path; always consumes n + 1 normal draws."""
    z = rng.normal(size=n + 1)
    if n == 0:
        return np.zeros(0)
    if sigma == 0.0:
        return np.zeros(n)
    marginal = sigma / np.sqrt(1.0 - phi * phi) if phi > 0 else sigma
    x0 = marginal * z[0]
    out, _ = lfilter([1.0], [1.0, -phi], sigma * z[1:], zi=[phi * x0])
    return out


def _seasonal(ts: np.ndarray) -> np.ndarray:
    """Cosine with period one year, maximum near January 1st."""
    return np.cos(2.0 * np.pi * (ts % YEAR_SECONDS) / YEAR_SECONDS)


def _diurnal(ts: np.ndarray) -> np.ndarray:
    """Cosine with period one day, maximum at 15:00 UTC."""
    return np.cos(2.0 * np.pi * ((ts % SECONDS_PER_DAY) - 54000) / SECONDS_PER_DAY)


def wind_process(
    seed,
    n_steps: int,
    resolution_s: int = 600,
    env: EnvironmentParams | None = None,
    start_ts: int = 0,
) -> np.ndarray:
    """Nonnegative wind-speed series: AR(1) around a seasonal/diurnal mean.

    ``seed`` may be an integer or a numpy Generator/SeedSequence.
    """
    if n_steps < 1:
        raise ConfigError("n_steps must be at least 1")
    env = env or EnvironmentParams()
    rng = np.random.default_rng(seed)
    ts = start_ts + resolution_s * np.arange(n_steps, dtype=np.int64)
    mean = (
        env.mean_wind
        - env.wind_seasonal_amp * _seasonal(ts)
        + env.wind_diurnal_amp * _diurnal(ts)
    )
    return np.clip(mean + _ar1(rng, n_steps, env.wind_ar, env.wind_sigma), 0.0, None)


def _ambient_process(
    rng: np.random.Generator, ts: np.ndarray, env: EnvironmentParams
) -> np.ndarray:
    mean = (
        env.mean_ambient
        - env.ambient_seasonal_amp * _seasonal(ts)
        + env.ambient_diurnal_amp * _diurnal(ts)
    )
    return mean + _ar1(rng, ts.size, env.ambient_ar, env.ambient_sigma)


def power_curve(wind, p: TurbineParams):
    """Power in kW: zero outside [cut_in, cut_out), cubic up to rated."""
    w = np.asarray(wind, dtype=np.float64)
    frac = (w**3 - p.cut_in**3) / (p.rated**3 - p.cut_in**3)
    out = np.where(w < p.rated, p.rated_power * frac, p.rated_power)
    out = np.where((w < p.cut_in) | (w >= p.cut_out), 0.0, out)
    return float(out) if np.isscalar(wind) else out


def thermal_power_cap(ambient, p: TurbineParams):
    """Derating ceiling in kW as a function of ambient temperature."""
    a = np.asarray(ambient, dtype=np.float64)
    span = p.curtail_full - p.curtail_start
    frac = 1.0 - (1.0 - p.curtail_floor) * np.clip(
        (a - p.curtail_start) / span, 0.0, 1.0
    )
    out = p.rated_power * frac
    return float(out) if np.isscalar(ambient) else out


def effective_wind(power, p: TurbineParams):
    """Wind speed at which the uncapped power curve produces ``power``."""
    q = np.asarray(power, dtype=np.float64)
    frac = np.clip(q / p.rated_power, 0.0, 1.0)
    cubed = p.cut_in**3 + frac * (p.rated**3 - p.cut_in**3)
    out = np.cbrt(cubed)
    return float(out) if np.isscalar(power) else out


def rotor_speed_curve(wind, p: TurbineParams):
    """Rotor speed in rpm: saturating ramp between cut-in and rated."""
    w = np.asarray(wind, dtype=np.float64)
    ramp = np.clip((w - p.cut_in) / (p.rated - p.cut_in), 0.0, 1.0)
    out = ROTOR_MIN_RPM + (ROTOR_MAX_RPM - ROTOR_MIN_RPM) * ramp
    out = np.where((w < p.cut_in) | (w >= p.cut_out), 0.0, out)
    return float(out) if np.isscalar(wind) else out


def pitch_curve(wind, p: TurbineParams):
    """Pitch angle in degrees: regulation above rated, feathered at cut-out."""
    w = np.asarray(wind, dtype=np.float64)
    out = np.clip(PITCH_DEG_PER_MS * (w - p.rated), 0.0, PITCH_MAX_DEG)
    out = np.where(w >= p.cut_out, PITCH_FEATHERED_DEG, out)
    return float(out) if np.isscalar(wind) else out


def thermal_step(state, inputs, p: TurbineParams) -> tuple[float, float]:
    """One update of the two-node bearing model.

    ``state`` is (T_ims, T_hss) in Celsius; ``inputs`` is (power kW,
    ambient Celsius, fault_multiplier). Fault heat enters only the IMS node.
    """
    t_ims, t_hss = state
    power, ambient, mult = inputs
    if mult < 1.0:
        raise ConfigError("fault_multiplier must be >= 1")
    next_ims = (
        t_ims
        + p.a_ims * power * mult
        + p.h * (t_hss - t_ims)
        + p.c * (ambient - t_ims)
    )
    next_hss = (
        t_hss + p.a_hss * power + p.h * (t_ims - t_hss) + p.c * (ambient - t_hss)
    )
    return (next_ims, next_hss)


def thermal_steady_state(
    power: float, ambient: float, mult: float, p: TurbineParams
) -> tuple[float, float]:
    """Analytic fixed point of thermal_step for constant inputs."""
    a = np.array([[p.h + p.c, -p.h], [-p.h, p.h + p.c]])
    b = np.array(
        [p.a_ims * power * mult + p.c * ambient, p.a_hss * power + p.c * ambient]
    )
    t_ims, t_hss = np.linalg.solve(a, b)
    return (float(t_ims), float(t_hss))


def _up_segments(up: np.ndarray) -> list[tuple[int, int]]:
    """Contiguous [i, j) runs where the turbine is operating."""
    idx = np.flatnonzero(up)
    if idx.size == 0:
        return []
    breaks = np.flatnonzero(np.diff(idx) > 1)
    starts = np.concatenate(([0], breaks + 1))
    ends = np.concatenate((breaks + 1, [idx.size]))
    return [(int(idx[s]), int(idx[e - 1]) + 1) for s, e in zip(starts, ends)]


def _thermal_path(
    power: np.ndarray,
    ambient_eff: np.ndarray,
    mult: np.ndarray,
    up: np.ndarray,
    p: TurbineParams,
) -> tuple[np.ndarray, np.ndarray]:
    """Vectorized thermal recursion over operating segments.

    The coupled update decouples into sum and difference modes, each a scalar
    AR(1) evaluated with lfilter. Each segment restarts from thermal
    equilibrium with the local effective ambient (cold start after repair).
    """
    n = power.size
    t_ims = np.full(n, np.nan)
    t_hss = np.full(n, np.nan)
    phi_s = 1.0 - p.c
    phi_d = 1.0 - 2.0 * p.h - p.c
    for i0, i1 in _up_segments(up):
        u = (p.a_ims * mult[i0:i1] + p.a_hss) * power[i0:i1] + 2.0 * p.c * ambient_eff[
            i0:i1
        ]
        v = (p.a_ims * mult[i0:i1] - p.a_hss) * power[i0:i1]
        s0 = 2.0 * ambient_eff[i0]
        s, _ = lfilter([1.0], [1.0, -phi_s], u, zi=[phi_s * s0])
        d, _ = lfilter([1.0], [1.0, -phi_d], v, zi=[phi_d * 0.0])
        t_ims[i0:i1] = 0.5 * (s + d)
        t_hss[i0:i1] = 0.5 * (s - d)
    return t_ims, t_hss


def _fault_profile(
    ts: np.ndarray, faults: Sequence[FaultScenario], repair_days: int
) -> tuple[np.ndarray, np.ndarray]:
    """Per-step fault multiplier and operating mask for one turbine."""
    mult = np.ones(ts.size)
    up = np.ones(ts.size, dtype=bool)
    for f in sorted(faults, key=lambda f: f.failure_time):
        onset = f.onset_time
        span = f.failure_time - onset
        progress = np.clip((ts - onset) / span, 0.0, 1.0)
        ramping = (ts >= onset) & (ts < f.failure_time)
        mult = np.where(ramping, 1.0 + f.severity * progress, mult)
        resume = f.failure_time + repair_days * SECONDS_PER_DAY
        up &= ~((ts >= f.failure_time) & (ts < resume))
    return mult, up


def simulate_farm(cfg: SimConfig) -> tuple[FarmDataset, list[FailureRecord]]:
    """Generate the farm dataset and its ground-truth failure records.

    Deterministic for a fixed config: each turbine has its own child PRNG
    stream spawned from the config seed, so results do not depend on
    scheduling. Downtime rows (failure to repair) are absent from the output.
    """
    n = cfg.n_steps
    if n < 1:
        raise ConfigError("period too short for one sample")
    ts = cfg.period.start + cfg.resolution_s * np.arange(n, dtype=np.int64)
    faults_by_turbine: dict[str, list[FaultScenario]] = {}
    for f in cfg.faults:
        faults_by_turbine.setdefault(f.turbine_id, []).append(f)
    env = cfg.environment
    noise = cfg.noise.as_dict()
    turbines = []
    children = np.random.SeedSequence(cfg.seed).spawn(cfg.n_turbines)
    for tid, child in zip(cfg.turbine_ids, children):
        rng = np.random.default_rng(child)
        wind = wind_process(rng, n, cfg.resolution_s, env, cfg.period.start)
        ambient = _ambient_process(rng, ts, env)
        nacelle = _ar1(rng, n, env.nacelle_ar, env.nacelle_sigma)
        nacelle = nacelle * (1.0 + env.nacelle_seasonal_mod * _seasonal(ts))
        # One draw per channel on the full grid, in schema order, before any
        # rows are dropped: runs differing only in faults share their noise.
        meas = {name: rng.normal(size=n) for name in CHANNEL_NAMES}
        # Bearing sensors are conditioned and clamp outliers, so their
        # reading error is bounded; the weather channels are not.
        for name in ("gearbox_hss_bearing_temp", "gearbox_ims_bearing_temp"):
            meas[name] = np.clip(meas[name], -2.5, 2.5)
        power = np.minimum(
            power_curve(wind, cfg.params), thermal_power_cap(ambient, cfg.params)
        )
        # Rotor speed and pitch follow the realized operating point: under
        # derating the drivetrain runs as if the wind were weaker, with the
        # blades pitched out to shed the difference.
        w_eff = np.minimum(wind, effective_wind(power, cfg.params))
        shed = PITCH_DEG_PER_MS * np.clip(wind - w_eff, 0.0, None)
        pitch = np.clip(pitch_curve(wind, cfg.params) + shed, 0.0, None)
        pitch = np.where(wind >= cfg.params.cut_out, PITCH_FEATHERED_DEG, pitch)
        rotor = np.where(
            wind >= cfg.params.cut_out,
            0.0,
            rotor_speed_curve(w_eff, cfg.params),
        )
        mult, up = _fault_profile(ts, faults_by_turbine.get(tid, ()), cfg.repair_days)
        t_ims, t_hss = _thermal_path(power, ambient + nacelle, mult, up, cfg.params)
        truth = {
            "wind_speed": wind,
            "active_power": power,
            "rotor_speed": rotor,
            "pitch_angle": pitch,
            "ambient_temp": ambient,
            "gearbox_hss_bearing_temp": t_hss,
            "gearbox_ims_bearing_temp": t_ims,
        }
        channels = {
            name: (truth[name] + noise[name] * meas[name])[up]
            for name in CHANNEL_NAMES
        }
        # Anemometers never report negative speeds; other sensors may.
        channels["wind_speed"] = np.clip(channels["wind_speed"], 0.0, None)
        turbines.append(TurbineSeries(tid, cfg.resolution_s, ts[up], channels))
    failures = sorted(
        (
            FailureRecord(f.turbine_id, f.failure_time, GEARBOX_IMS_COMPONENT)
            for f in cfg.faults
        ),
        key=lambda r: (r.failure_time, r.turbine_id),
    )
    return FarmDataset(tuple(turbines)), failures


# ---------------------------------------------------------------------------
# Default desk-scale scenario and the scenario file grammar.
# ---------------------------------------------------------------------------

DEFAULT_SEED = 7

# Failure severity spans three regimes. The summer anchor T05 runs hot
# enough friction for the bearing to leave its normal envelope long before
# failure. T01 develops through late spring with enough heat to lift the
# raw temperature to the lower edge of its normal summer range. The six
# cool-season cases never push the bearing outside its normal temperature
# range at all: their early signature exists only relative to a model of
# expected behaviour, not in absolute level. Severities differ because the
# wind resource differs: a deep-winter window sees so little power that the
# same friction multiplier sheds far less heat than it would in spring.
_DEFAULT_FAULTS = (
    ("T01", "2012-06-10T00:00:00Z", 1.16, 60),
    ("T02", "2012-11-25T00:00:00Z", 0.91, 75),
    ("T03", "2012-11-20T00:00:00Z", 0.98, 60),
    ("T04", "2012-05-01T00:00:00Z", 0.74, 75),
    ("T05", "2012-07-15T00:00:00Z", 3.2, 60),
    ("T06", "2012-11-10T00:00:00Z", 1.09, 60),
    ("T07", "2012-04-10T00:00:00Z", 0.33, 75),
    ("T08", "2012-05-05T00:00:00Z", 1.11, 60),
)


def default_sim_config(seed: int = DEFAULT_SEED) -> SimConfig:
    """Desk-scale reference farm: 8 turbines, 3 years at 10-minute
    resolution, 8 progressive IMS bearing faults in the final year."""
    return SimConfig(
        seed=seed,
        n_turbines=8,
        period=TimeInterval(
            parse_rfc3339("2010-01-01T00:00:00Z"),
            parse_rfc3339("2013-01-01T00:00:00Z"),
        ),
        faults=tuple(
            FaultScenario(tid, parse_rfc3339(when), onset_lead_days=lead, severity=sev)
            for tid, when, sev, lead in _DEFAULT_FAULTS
        ),
    )


def _take(mapping: dict, key: str, context: str):
    if key not in mapping:
        raise ConfigError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _build_section(cls, data: dict, context: str):
    if not isinstance(data, dict):
        raise ConfigError(f"{context}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"{context}: unknown keys {sorted(unknown)}; known keys are "
            f"{sorted(known)}"
        )
    try:
        return cls(**data)
    except TypeError as exc:
        raise ConfigError(f"{context}: {exc}") from None


def sim_config_from_dict(data: dict) -> SimConfig:
    """Build a SimConfig from the scenario mapping (see README grammar)."""
    if not isinstance(data, dict):
        raise ConfigError("scenario: top level must be an object")
    known = {
        "seed",
        "n_turbines",
        "period",
        "resolution_s",
        "params",
        "environment",
        "noise",
        "faults",
        "repair_days",
    }
    unknown = set(data) - known
    if unknown:
        raise ConfigError(
            f"scenario: unknown keys {sorted(unknown)}; known keys are "
            f"{sorted(known)}"
        )
    period_raw = _take(data, "period", "scenario")
    if not isinstance(period_raw, dict) or set(period_raw) != {"start", "end"}:
        raise ConfigError("scenario.period: expected {'start': ..., 'end': ...}")
    try:
        period = TimeInterval(
            parse_rfc3339(str(period_raw["start"])),
            parse_rfc3339(str(period_raw["end"])),
        )
    except DataError as exc:
        raise ConfigError(f"scenario.period: {exc}") from None
    faults = []
    for i, raw in enumerate(data.get("faults", [])):
        context = f"scenario.faults[{i}]"
        if not isinstance(raw, dict):
            raise ConfigError(f"{context}: expected an object")
        raw = dict(raw)
        try:
            raw["failure_time"] = parse_rfc3339(
                str(_take(raw, "failure_time", context))
            )
        except DataError as exc:
            raise ConfigError(f"{context}: {exc}") from None
        faults.append(_build_section(FaultScenario, raw, context))
    return SimConfig(
        seed=int(_take(data, "seed", "scenario")),
        n_turbines=int(_take(data, "n_turbines", "scenario")),
        period=period,
        resolution_s=int(data.get("resolution_s", 600)),
        params=_build_section(
            TurbineParams, data.get("params", {}), "scenario.params"
        ),
        environment=_build_section(
            EnvironmentParams, data.get("environment", {}), "scenario.environment"
        ),
        noise=_build_section(NoiseParams, data.get("noise", {}), "scenario.noise"),
        faults=tuple(faults),
        repair_days=int(data.get("repair_days", 30)),
    )


def sim_config_to_dict(cfg: SimConfig) -> dict:
    """Inverse of sim_config_from_dict; output is JSON-serializable."""
    from .scada import format_rfc3339

    return {
        "seed": cfg.seed,
        "n_turbines": cfg.n_turbines,
        "period": {
            "start": format_rfc3339(cfg.period.start),
            "end": format_rfc3339(cfg.period.end),
        },
        "resolution_s": cfg.resolution_s,
        "params": {
            f.name: getattr(cfg.params, f.name) for f in fields(TurbineParams)
        },
        "environment": {
            f.name: getattr(cfg.environment, f.name)
            for f in fields(EnvironmentParams)
        },
        "noise": cfg.noise.as_dict(),
        "faults": [
            {
                "turbine_id": f.turbine_id,
                "failure_time": format_rfc3339(f.failure_time),
                "onset_lead_days": f.onset_lead_days,
                "severity": f.severity,
            }
            for f in cfg.faults
        ],
        "repair_days": cfg.repair_days,
    }


def load_scenario_file(path) -> SimConfig:
    """Read a JSON scenario file into a SimConfig."""
    try:
        with open(path, encoding="utf-8") as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: line {exc.lineno}: {exc.msg}") from None
    return sim_config_from_dict(data)


def healthy_variant(cfg: SimConfig) -> SimConfig:
    """Same config with all faults removed; shares noise with the original."""
    return replace(cfg, faults=())
