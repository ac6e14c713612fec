"""Two-loop posture/movement simulation around one shared plant.

Each loop compares its planner target (plus an optional pre-controller
injection such as an APA) with its observer's estimate, drives a PID, and
feeds the command both to the shared plant and, as an efference copy, to its
own observer. Both observers see the same measured plant output.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Sequence

import numpy as np

from . import signals as sig
from .kalman import KalmanConfig, NoiseModel, kalman_step
from .lti import StateSpaceModel, lti_step, tf_to_ss
from .pid import PidConfig, PidState, pid_step

LOOP_NAMES = ("posture", "movement")

COLUMNS = (
    "t",
    "posture_target",
    "posture_apa",
    "posture_error",
    "posture_cmd",
    "posture_est",
    "movement_target",
    "movement_apa",
    "movement_error",
    "movement_cmd",
    "movement_est",
    "disturbance",
    "plant_raw",
    "y",
)

BUILTIN_SCENARIOS = ("posture", "posture_ext_perturb", "pm_no_apa", "pm_apa")

# Reference model constants. ts and qw are calibrated; see README "Model choices".
BUILTIN_TS = 1.0
BUILTIN_DURATION = 10.0
BUILTIN_NUM = (1.0,)
BUILTIN_DEN = (1.0, 0.5)
BUILTIN_GAINS = dict(kp=0.5, ki=1.0, kd=0.0, filter_n=100.0)
BUILTIN_G = 0.2
BUILTIN_H = 0.0
BUILTIN_QW = 0.05
BUILTIN_RV = 1.0


class SimulationError(RuntimeError):
    def __init__(self, step: int, signal: str, value: float):
        super().__init__(f"non-finite {signal} ({value}) at step {step}")
        self.step = step
        self.signal = signal


@dataclass(frozen=True)
class LoopConfig:
    """One control loop: planner target, injection, PID gains, observer noise.

    ``internal_model`` defaults to the plant; set it to study a mismatched
    internal model.
    """

    name: str
    target: sig.Signal = sig.ZERO
    injection: sig.Signal = sig.ZERO
    kp: float = BUILTIN_GAINS["kp"]
    ki: float = BUILTIN_GAINS["ki"]
    kd: float = BUILTIN_GAINS["kd"]
    filter_n: float = BUILTIN_GAINS["filter_n"]
    noise: NoiseModel = field(default_factory=lambda: NoiseModel([BUILTIN_G], BUILTIN_H, BUILTIN_QW, BUILTIN_RV))
    internal_model: StateSpaceModel | None = None

    def pid(self, ts: float) -> PidConfig:
        return PidConfig(self.kp, self.ki, self.kd, self.filter_n, ts)

    def kalman(self, plant: StateSpaceModel) -> KalmanConfig:
        return _design(self.internal_model or plant, self.noise)


@lru_cache(maxsize=256)
def _design(model, noise):
    return KalmanConfig.design(model, noise)


@dataclass(frozen=True)
class SimConfig:
    ts: float = BUILTIN_TS
    duration: float = BUILTIN_DURATION
    plant_num: tuple = BUILTIN_NUM
    plant_den: tuple = BUILTIN_DEN
    posture: LoopConfig = field(default_factory=lambda: LoopConfig("posture"))
    movement: LoopConfig = field(default_factory=lambda: LoopConfig("movement"))
    disturbance: sig.Signal = sig.ZERO
    x0: tuple | None = None
    warnings: tuple = field(default=(), compare=False, repr=False)

    def __post_init__(self):
        if not (math.isfinite(self.ts) and self.ts > 0):
            raise ValueError(f"ts must be positive, got {self.ts}")
        if not self.duration >= self.ts:
            raise ValueError(f"duration ({self.duration}) must be at least ts ({self.ts})")
        object.__setattr__(self, "plant_num", tuple(float(v) for v in self.plant_num))
        object.__setattr__(self, "plant_den", tuple(float(v) for v in self.plant_den))
        plant = tf_to_ss(self.plant_num, self.plant_den)
        x0 = (0.0,) * plant.order if self.x0 is None else tuple(float(v) for v in self.x0)
        if len(x0) != plant.order:
            raise ValueError(f"x0 has {len(x0)} entries, plant order is {plant.order}")
        object.__setattr__(self, "x0", x0)
        for loop, name in ((self.posture, "posture"), (self.movement, "movement")):
            if loop.name != name:
                raise ValueError(f"loop in the {name} slot is named {loop.name!r}")
            if loop.noise.g.shape[0] != plant.order and loop.internal_model is None:
                raise ValueError(
                    f"{name}: g has {loop.noise.g.shape[0]} entries, plant order is {plant.order}"
                )
            loop.pid(self.ts)

        notes = list(self.warnings)
        for path in ("posture.target", "posture.injection", "movement.target",
                     "movement.injection", "disturbance"):
            spec = self._get(path)
            snapped = sig.snap(spec, self.ts)
            for before, after in zip(sig.event_times(spec), sig.event_times(snapped)):
                if abs(before - after) > 1e-9 * self.ts:
                    notes.append(f"{path}: event time {before!r} snapped to {after!r}")
            self._set(path, snapped)
        object.__setattr__(self, "warnings", tuple(notes))

    def _get(self, path):
        obj = self
        for part in path.split("."):
            obj = getattr(obj, part)
        return obj

    def _set(self, path, value):
        if "." in path:
            head, attr = path.split(".")
            loop = dataclasses.replace(getattr(self, head), **{attr: value})
            object.__setattr__(self, head, loop)
        else:
            object.__setattr__(self, path, value)

    @property
    def plant(self) -> StateSpaceModel:
        return tf_to_ss(self.plant_num, self.plant_den)

    @property
    def loops(self) -> tuple[LoopConfig, LoopConfig]:
        return (self.posture, self.movement)

    @property
    def n_samples(self) -> int:
        return sig.grid_length(self.ts, self.duration)

    @property
    def mismatched_loops(self) -> list[str]:
        plant = self.plant
        return [lp.name for lp in self.loops if lp.internal_model is not None and lp.internal_model != plant]


class Trace:
    """Per-sample record of every named signal, one numpy column per name."""

    def __init__(self, columns: dict[str, np.ndarray], ts: float):
        self.columns = columns
        self.ts = ts

    def __getitem__(self, name: str) -> np.ndarray:
        return self.columns[name]

    def __len__(self) -> int:
        return len(self.columns["t"])

    @property
    def t(self) -> np.ndarray:
        return self.columns["t"]

    def rows(self):
        for k in range(len(self)):
            yield {name: self.columns[name][k] for name in COLUMNS}

    def index_of(self, t: float) -> int:
        k = round(t / self.ts)
        if not 0 <= k < len(self):
            raise ValueError(f"t = {t} is outside the trace span [0, {self.t[-1]}]")
        return k

    def y_at(self, t: float) -> float:
        return float(self.columns["y"][self.index_of(t)])

    def window(self, t0: float, t1: float) -> slice:
        """Grid samples with ``t0 <= k*ts < t1``."""
        if t0 < 0 or t1 > self.t[-1] + self.ts or not t0 < t1:
            raise ValueError(f"window [{t0}, {t1}) is outside the trace span")
        k0 = math.ceil(t0 / self.ts - 1e-9)
        k1 = math.ceil(t1 / self.ts - 1e-9)
        return slice(k0, min(k1, len(self)))

    def window_mean(self, t0: float, t1: float, column: str = "y") -> float:
        sl = self.window(t0, t1)
        values = self.columns[column][sl]
        if values.size == 0:
            raise ValueError(f"window [{t0}, {t1}) contains no grid samples at ts = {self.ts}")
        return float(values.mean())

    def identical(self, other: "Trace") -> bool:
        return all(
            self.columns[n].tobytes() == other.columns[n].tobytes() for n in COLUMNS
        )


def simulate(config: SimConfig) -> Trace:
    ts = config.ts
    n = config.n_samples
    plant = config.plant
    loops = config.loops
    pids = [lp.pid(ts) for lp in loops]
    kalmans = [lp.kalman(plant) for lp in loops]

    cols = {name: np.empty(n) for name in COLUMNS}
    x = np.array(config.x0, dtype=float)
    pid_states = [PidState(), PidState()]
    xhats = [np.zeros(k.model.order) for k in kalmans]
    estimates = [0.0, 0.0]

    for k in range(n):
        t = k * ts
        dist = config.disturbance(t)
        cols["t"][k] = t
        cmds = []
        for i, lp in enumerate(loops):
            target = lp.target(t)
            inj = lp.injection(t)
            err = target + inj - estimates[i]
            pid_states[i], u = pid_step(pids[i], pid_states[i], err)
            _check(k, f"{lp.name}_cmd", u)
            cmds.append(u)
            cols[f"{lp.name}_target"][k] = target
            cols[f"{lp.name}_apa"][k] = inj
            cols[f"{lp.name}_error"][k] = err
            cols[f"{lp.name}_cmd"][k] = u

        x, raw = lti_step(plant, x, cmds[0] + cmds[1])
        y = raw + dist
        _check(k, "y", y)
        cols["plant_raw"][k] = raw
        cols["disturbance"][k] = dist
        cols["y"][k] = y

        for i, lp in enumerate(loops):
            xhats[i], estimates[i], _ = kalman_step(kalmans[i], xhats[i], cmds[i], y)
            _check(k, f"{lp.name}_est", estimates[i])
            cols[f"{lp.name}_est"][k] = estimates[i]

    return Trace(cols, ts)


def _check(step, name, value):
    if not math.isfinite(value):
        raise SimulationError(step, name, value)


@dataclass(frozen=True)
class Metrics:
    final_y: float
    peak_y: float
    expected_final: float
    settled: bool
    max_apa_deviation: float
    movement_error_at_onset: float

    def as_dict(self) -> dict:
        return dataclasses.asdict(self)


def compute_metrics(trace: Trace, config: SimConfig, *, settle_tol: float = 0.01,
                    settle_window: float = 0.5) -> Metrics:
    """Summary numbers for one run.

    ``movement_error_at_onset`` is NaN when the movement target is never
    nonzero; ``max_apa_deviation`` is 0 when no posture injection is active.
    """
    if len(trace) == 0:
        raise ValueError("empty trace")
    y = trace["y"]
    expected = float(trace["posture_target"][-1] + trace["movement_target"][-1])
    tail = trace.window(max(0.0, trace.t[-1] - settle_window), trace.t[-1] + trace.ts)
    settled = bool(np.all(np.abs(y[tail] - expected) < settle_tol))

    apa_active = trace["posture_apa"] != 0
    if apa_active.any():
        dev = np.abs(y[apa_active] - trace["posture_target"][apa_active])
        max_apa = float(dev.max())
    else:
        max_apa = 0.0

    onset = np.flatnonzero(trace["movement_target"] != 0)
    err_onset = float(trace["movement_error"][onset[0]]) if onset.size else math.nan

    return Metrics(
        final_y=float(y[-1]),
        peak_y=float(y[np.argmax(np.abs(y))]),
        expected_final=expected,
        settled=settled,
        max_apa_deviation=max_apa,
        movement_error_at_onset=err_onset,
    )


def builtin_config(scenario: str) -> SimConfig:
    if scenario not in BUILTIN_SCENARIOS:
        raise ValueError(f"unknown built-in scenario {scenario!r}; choose from {BUILTIN_SCENARIOS}")
    posture = LoopConfig(
        "posture",
        target=sig.Step(0.0, 1.0),
        injection=sig.Pulse(3.0, 5.0, -0.5) if scenario == "pm_apa" else sig.ZERO,
    )
    movement = LoopConfig(
        "movement",
        target=sig.Pulse(5.0, 7.0, 5.0) if scenario in ("pm_no_apa", "pm_apa") else sig.ZERO,
    )
    # one-sample perturbation at t = 5
    disturbance = sig.Pulse(5.0, 5.0 + BUILTIN_TS, -5.0) if scenario == "posture_ext_perturb" else sig.ZERO
    return SimConfig(posture=posture, movement=movement, disturbance=disturbance)


def run_paper_scenario(scenario: str) -> tuple[Trace, Metrics]:
    config = builtin_config(scenario)
    trace = simulate(config)
    return trace, compute_metrics(trace, config)


_PID_KEYS = {"kp": "kp", "ki": "ki", "kd": "kd", "n": "filter_n"}
_NOISE_KEYS = ("qw", "rv", "h")
_SIGNAL_KEYS = {"target": "target", "apa": "injection"}
_SIGNAL_FIELDS = ("value", "amplitude", "onset", "offset")


def _as_float(value) -> float:
    if isinstance(value, str):
        return sig.parse_number(value.strip())
    value = float(value)
    if not math.isfinite(value):
        raise ValueError(f"non-finite value {value}")
    return value


def _as_list(value) -> tuple:
    if isinstance(value, str):
        return tuple(sig.parse_number(tok) for tok in value.split())
    if isinstance(value, (int, float)):
        return (_as_float(value),)
    return tuple(_as_float(v) for v in value)


def _set_signal_field(spec, name, value, path):
    if name == "amplitude" and isinstance(spec, sig.Constant):
        name = "value"
    if name not in _SIGNAL_FIELDS or not hasattr(spec, name):
        raise KeyError(f"{path}: signal {sig.format_signal(spec)!r} has no field {name!r}")
    return dataclasses.replace(spec, **{name: _as_float(value)})


def _signal_value(spec, rest, value, path):
    if not rest:
        return value if not isinstance(value, str) else sig.parse_signal(value)
    if len(rest) > 1:
        raise KeyError(f"unknown parameter path {path!r}")
    return _set_signal_field(spec, rest[0], value, path)


def set_param(config: SimConfig, path: str, value) -> SimConfig:
    """Return a copy of ``config`` with the leaf named by ``path`` replaced.

    Paths mirror scenario-file keys: ``simulation.ts``, ``plant.den``,
    ``posture.kp``, ``movement.qw``, ``movement.target`` (signal text) and
    signal fields such as ``movement.target.amplitude`` or
    ``disturbance.signal.onset``. String values are parsed.
    """
    parts = path.strip().split(".")
    section, rest = parts[0], parts[1:]
    if not rest:
        if section == "disturbance":
            rest = ["signal"]
        else:
            raise KeyError(f"unknown parameter path {path!r}")
    key = rest[0]

    if section == "simulation" and len(rest) == 1 and key in ("ts", "duration"):
        return dataclasses.replace(config, **{key: _as_float(value)})
    if section == "plant" and len(rest) == 1 and key in ("num", "den", "x0"):
        field_name = {"num": "plant_num", "den": "plant_den", "x0": "x0"}[key]
        changes = {field_name: _as_list(value)}
        if key == "den" and len(_as_list(value)) != len(config.plant_den):
            changes["x0"] = None
        return dataclasses.replace(config, **changes)
    if section == "disturbance" and key == "signal":
        spec = _signal_value(config.disturbance, rest[1:], value, path)
        return dataclasses.replace(config, disturbance=spec)
    if section in LOOP_NAMES:
        loop = getattr(config, section)
        if key in _PID_KEYS and len(rest) == 1:
            loop = dataclasses.replace(loop, **{_PID_KEYS[key]: _as_float(value)})
        elif key in _NOISE_KEYS and len(rest) == 1:
            loop = dataclasses.replace(loop, noise=dataclasses.replace(loop.noise, **{key: _as_float(value)}))
        elif key == "g" and len(rest) == 1:
            loop = dataclasses.replace(loop, noise=dataclasses.replace(loop.noise, g=_as_list(value)))
        elif key in _SIGNAL_KEYS:
            attr = _SIGNAL_KEYS[key]
            spec = _signal_value(getattr(loop, attr), rest[1:], value, path)
            loop = dataclasses.replace(loop, **{attr: spec})
        else:
            raise KeyError(f"unknown parameter path {path!r}")
        return dataclasses.replace(config, **{section: loop})
    raise KeyError(f"unknown parameter path {path!r}")


def sweep(base: SimConfig, path: str, values: Sequence) -> list[tuple[object, Metrics]]:
    """Run one independent simulation per value, in input order."""
    rows = []
    for value in values:
        config = set_param(base, path, value)
        trace = simulate(config)
        rows.append((value, compute_metrics(trace, config)))
    return rows
