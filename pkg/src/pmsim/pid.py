"""Discrete parallel-form PID with a forward-Euler filtered derivative."""

from __future__ import annotations

from dataclasses import dataclass


@dataclass(frozen=True)
class PidConfig:
    kp: float = 0.5
    ki: float = 1.0
    kd: float = 0.0
    filter_n: float = 100.0
    ts: float = 1.0

    def __post_init__(self):
        if not self.ts > 0:
            raise ValueError(f"PID sample time must be positive, got {self.ts}")
        if self.kd != 0 and not self.filter_n > 0:
            raise ValueError("derivative filter coefficient must be positive when kd != 0")


@dataclass(frozen=True)
class PidState:
    integ: float = 0.0
    dfilt: float = 0.0


def pid_step(config: PidConfig, state: PidState, e: float) -> tuple[PidState, float]:
    """One controller update for error ``e``.

    The command uses the incoming integrator and filter states; both are then
    advanced by forward Euler. No saturation or anti-windup.
    """
    dterm = config.filter_n * (config.kd * e - state.dfilt)
    u = config.kp * e + state.integ + dterm
    new_state = PidState(
        integ=state.integ + config.ki * config.ts * e,
        dfilt=state.dfilt + config.ts * dterm,
    )
    return new_state, u


def pid_reset(state: PidState | None = None) -> PidState:
    return PidState()
