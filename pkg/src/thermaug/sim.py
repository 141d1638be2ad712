"""Synthetic test-cell acquisitions from a lumped room/wall thermal model.

Room air and the envelope are two capacities coupled by a conductance; the
envelope also leaks to outdoors. Four actuators (two heaters, two coolers)
each carry a first-order lag toward their setpoint and feed the room
through a coupling gain. Setpoint combinations are redrawn every series,
and the state carries over from one series to the next within a phase.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, asdict
from typing import Sequence

import numpy as np

from ._kernels.thermal import euler
from .dataio import SERIES_LENGTH, SeriesRecord
from .errors import UnstableIntegration
from .seeding import rng_for

DT_SECONDS = 60.0
STATE_LIMIT = 200.0
OFF = None


@dataclass(frozen=True)
class PhasePlan:
    phase: int
    n_series: int
    free_fall_minutes: int = 0
    outdoor_mean: float = 5.0

    def __post_init__(self):
        if self.phase not in (1, 2, 3, 4):
            raise ValueError(f"phase must be 1..4, got {self.phase}")
        if self.n_series < 0:
            raise ValueError("n_series must be non-negative")
        if self.free_fall_minutes not in (0, 60):
            raise ValueError("free_fall_minutes must be 0 or 60")


DEFAULT_PHASE_PLAN = (
    PhasePlan(1, 83, 0, 16.0),
    PhasePlan(2, 41, 60, 7.0),
    PhasePlan(3, 6, 0, -3.0),
    PhasePlan(4, 17, 0, 0.0),
)


@dataclass(frozen=True)
class SimConfig:
    """Physical and protocol parameters.

    Capacities in J/K, conductances and gains in W/K, the actuator lag in
    minutes, temperatures in degC. Actuator order matches the setpoint
    columns: sp_ec3 and sp_sb43 are heaters, sp_b46 and sp_sb47 coolers.
    ``None`` in a level set means "off".
    """

    phase_plan: tuple[PhasePlan, ...] = DEFAULT_PHASE_PLAN
    heater_levels: tuple = (OFF, 20.0, 40.0, 60.0)
    cooler_levels: tuple = (OFF, 10.0, 15.0)
    room_capacitance: float = 8.0e5
    wall_capacitance: float = 1.3e7
    room_wall_conductance: float = 200.0
    wall_outdoor_conductance: float = 40.0
    actuator_gains: tuple[float, float, float, float] = (30.0, 30.0, 30.0, 30.0)
    actuator_time_constant: float = 10.0
    initial_temperature: float = 21.0
    outdoor_amplitude: float = 3.0
    noise_std: float = 0.01
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "phase_plan", tuple(
            p if isinstance(p, PhasePlan) else PhasePlan(*p) for p in self.phase_plan))
        for name in ("room_capacitance", "wall_capacitance", "room_wall_conductance",
                     "wall_outdoor_conductance", "actuator_time_constant"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be strictly positive")
        if len(self.actuator_gains) != 4 or any(not g > 0 for g in self.actuator_gains):
            raise ValueError("actuator_gains needs four strictly positive values")
        if self.noise_std < 0:
            raise ValueError("noise_std must be non-negative")
        if not self.heater_levels or not self.cooler_levels:
            raise ValueError("level sets must be non-empty")
        phases = [p.phase for p in self.phase_plan]
        if len(set(phases)) != len(phases):
            raise ValueError("phase ids in phase_plan must be unique")
        # keep the Euler update matrix non-negative (stable and order preserving)
        room_rate = DT_SECONDS * (self.room_wall_conductance + sum(self.actuator_gains)) / self.room_capacitance
        wall_rate = DT_SECONDS * (self.room_wall_conductance + self.wall_outdoor_conductance) / self.wall_capacitance
        if room_rate >= 1 or wall_rate >= 1 or self.actuator_time_constant <= 1:
            raise ValueError("parameters violate the explicit-Euler stability bound at dt = 1 min")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["phase_plan"] = [asdict(p) for p in self.phase_plan]
        d["heater_levels"] = list(self.heater_levels)
        d["cooler_levels"] = list(self.cooler_levels)
        d["actuator_gains"] = list(self.actuator_gains)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SimConfig":
        d = dict(d)
        if "phase_plan" in d:
            d["phase_plan"] = tuple(PhasePlan(**p) if isinstance(p, dict) else PhasePlan(*p) for p in d["phase_plan"])
        for k in ("heater_levels", "cooler_levels", "actuator_gains"):
            if k in d:
                d[k] = tuple(d[k])
        return cls(**d)


def integrate(cfg: SimConfig, x0, t_out, setpoints, active) -> np.ndarray:
    """Step the network ``len(t_out)`` minutes; returns (n + 1, 6) states.

    ``setpoints`` holds one value per actuator (NaN for off); ``active`` is an
    (n, 4) boolean mask of actuators driven at each step.
    """
    traj = euler(
        np.ascontiguousarray(x0, dtype=np.float64),
        np.ascontiguousarray(t_out, dtype=np.float64),
        np.ascontiguousarray(setpoints, dtype=np.float64),
        np.ascontiguousarray(active, dtype=np.bool_),
        float(cfg.room_capacitance),
        float(cfg.wall_capacitance),
        float(cfg.room_wall_conductance),
        float(cfg.wall_outdoor_conductance),
        np.asarray(cfg.actuator_gains, dtype=np.float64),
        float(cfg.actuator_time_constant) * 60.0,
        DT_SECONDS,
    )
    if not np.all(np.isfinite(traj)) or np.abs(traj).max() > STATE_LIMIT:
        raise UnstableIntegration(f"state left +-{STATE_LIMIT} degC during integration")
    return traj


def outdoor_profile(plan: PhasePlan, amplitude: float, start_minute: int, n: int = SERIES_LENGTH) -> np.ndarray:
    minutes = start_minute + np.arange(n)
    # daily minimum around 05:00 with the phase starting at midnight
    return plan.outdoor_mean - amplitude * np.cos(2 * math.pi * (minutes - 300) / 1440.0)


def _draw_setpoints(cfg: SimConfig, rng) -> np.ndarray:
    levels = [cfg.heater_levels, cfg.heater_levels, cfg.cooler_levels, cfg.cooler_levels]
    sp = []
    for lv in levels:
        v = lv[int(rng.integers(len(lv)))]
        sp.append(np.nan if v is None else float(v))
    return np.array(sp)


def _plan(cfg: SimConfig, phase: int) -> PhasePlan:
    for p in cfg.phase_plan:
        if p.phase == phase:
            return p
    raise ValueError(f"phase {phase} not in the phase plan")


def simulate_phase(cfg: SimConfig, phase: int) -> list[SeriesRecord]:
    plan = _plan(cfg, phase)
    rng = rng_for(cfg.seed, "sim", phase)
    t0 = cfg.initial_temperature
    x = np.full(6, t0)
    records = []
    for step in range(plan.n_series):
        sp = _draw_setpoints(cfg, rng)
        active = np.tile(~np.isnan(sp), (SERIES_LENGTH, 1))
        if plan.free_fall_minutes:
            active[SERIES_LENGTH - plan.free_fall_minutes :] = False
        t_out = outdoor_profile(plan, cfg.outdoor_amplitude, step * SERIES_LENGTH)
        traj = integrate(cfg, x, t_out, sp, active)
        room = traj[:SERIES_LENGTH, 0]
        noise = rng.normal(0.0, cfg.noise_std, SERIES_LENGTH) if cfg.noise_std > 0 else 0.0
        records.append(SeriesRecord(phase, step, 1, tuple(sp), room + noise))
        x = traj[SERIES_LENGTH]
    return records


def generate_rico_like(cfg: SimConfig | None = None) -> list[SeriesRecord]:
    cfg = cfg or SimConfig()
    out: list[SeriesRecord] = []
    for plan in cfg.phase_plan:
        out.extend(simulate_phase(cfg, plan.phase))
    return out
