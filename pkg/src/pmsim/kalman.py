"""Steady-state Kalman observer used as each loop's internal plant model.

The observer runs in predictor form::

    yhat     = c xhat + d u
    xhat'    = a xhat + b u + l (y - yhat)

with the fixed gain ``l`` taken from the discrete algebraic Riccati equation
for process noise entering through ``g`` and measurement noise ``v``::

    x[k+1] = a x + b u + g w,     y = c x + d u + h w + v,
    E[w^2] = qw,  E[v^2] = rv.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .lti import StateSpaceModel


class DareError(RuntimeError):
    """Raised when the Riccati iteration does not converge."""

    def __init__(self, message, residual):
        super().__init__(f"{message} (last change {residual:.3e})")
        self.residual = residual


@dataclass(frozen=True, eq=False)
class NoiseModel:
    g: np.ndarray
    h: float = 0.0
    qw: float = 0.05
    rv: float = 1.0

    def __post_init__(self):
        g = np.asarray(self.g, dtype=float).reshape(-1, 1)
        g.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "h", float(self.h))
        if not self.qw >= 0:
            raise ValueError(f"process noise variance qw must be >= 0, got {self.qw}")
        if not self.rv > 0:
            raise ValueError(f"measurement noise variance rv must be > 0, got {self.rv}")

    def __eq__(self, other):
        if not isinstance(other, NoiseModel):
            return NotImplemented
        return (
            self.g.shape == other.g.shape
            and np.array_equal(self.g, other.g)
            and (self.h, self.qw, self.rv) == (other.h, other.qw, other.rv)
        )

    def __hash__(self):
        return hash((self.g.tobytes(), self.h, self.qw, self.rv))

    def __repr__(self):
        return f"NoiseModel(g={self.g.ravel().tolist()}, h={self.h}, qw={self.qw}, rv={self.rv})"


def solve_dare(a, c, q_eff, r, s=None, *, tol=1e-14, max_iter=1_000_000):
    """Steady-state prediction covariance and gain by fixed-point iteration.

    Iterates ``p <- a p a' + q_eff - l (c p c' + r) l'`` with
    ``l = (a p c' + s)(c p c' + r)^-1``, starting from ``p = q_eff``, until no
    entry changes by ``tol`` or more. ``s`` is the process/measurement noise
    cross-covariance (zero when the noise does not feed through).

    Returns ``(p, l)`` with ``p`` n×n and ``l`` n×1.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    c = np.asarray(c, dtype=float).reshape(1, n)
    q_eff = np.asarray(q_eff, dtype=float).reshape(n, n)
    s = np.zeros((n, 1)) if s is None else np.asarray(s, dtype=float).reshape(n, 1)
    r = float(r)
    if not r > 0:
        raise ValueError(f"measurement variance r must be positive, got {r}")

    p = q_eff.copy()
    change = np.inf
    for _ in range(max_iter):
        innov_var = (c @ p @ c.T).item() + r
        l = (a @ p @ c.T + s) / innov_var
        p_next = a @ p @ a.T + q_eff - innov_var * (l @ l.T)
        p_next = 0.5 * (p_next + p_next.T)
        change = np.max(np.abs(p_next - p))
        p = p_next
        if not np.isfinite(change):
            break
        if change < tol:
            innov_var = (c @ p @ c.T).item() + r
            return p, (a @ p @ c.T + s) / innov_var
    raise DareError("Riccati iteration did not converge", change)


def dare_residual(a, c, q_eff, r, p) -> float:
    a = np.atleast_2d(np.asarray(a, dtype=float))
    n = a.shape[0]
    c = np.asarray(c, dtype=float).reshape(1, n)
    p = np.asarray(p, dtype=float).reshape(n, n)
    q_eff = np.asarray(q_eff, dtype=float).reshape(n, n)
    innov_var = (c @ p @ c.T).item() + r
    rhs = a @ p @ a.T - (a @ p @ c.T) @ (c @ p @ a.T) / innov_var + q_eff
    return float(np.max(np.abs(p - rhs)))


@dataclass(frozen=True, eq=False)
class KalmanConfig:
    model: StateSpaceModel
    noise: NoiseModel
    gain_l: np.ndarray = field(default=None)
    p: np.ndarray = field(default=None, repr=False)

    @classmethod
    def design(cls, model: StateSpaceModel, noise: NoiseModel) -> "KalmanConfig":
        if noise.g.shape[0] != model.order:
            raise ValueError(
                f"g has {noise.g.shape[0]} entries, model order is {model.order}"
            )
        q_eff = noise.g @ noise.g.T * noise.qw
        s = noise.g * noise.qw * noise.h
        r = noise.rv + noise.h**2 * noise.qw
        p, l = solve_dare(model.a, model.c, q_eff, r, s)
        p.setflags(write=False)
        l.setflags(write=False)
        return cls(model, noise, l, p)

    def __eq__(self, other):
        if not isinstance(other, KalmanConfig):
            return NotImplemented
        return self.model == other.model and self.noise == other.noise

    def __hash__(self):
        return hash((self.model, self.noise))


def kalman_step(config: KalmanConfig, xhat: np.ndarray, u: float, y: float):
    """Time update with innovation correction.

    Returns ``(xhat_next, estimate, yhat)`` where ``estimate`` is the
    estimated output ``c xhat_next`` forwarded to the loop's error sum and
    ``yhat`` is the prediction of ``y`` made from the incoming estimate.
    """
    m = config.model
    yhat = float(m.c[0] @ xhat) + m.d * u
    innovation = y - yhat
    xhat_next = m.a @ xhat + m.b[:, 0] * u + config.gain_l[:, 0] * innovation
    return xhat_next, float(m.c[0] @ xhat_next), yhat
