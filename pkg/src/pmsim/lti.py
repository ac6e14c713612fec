"""Discrete-time SISO linear systems in state-space form."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True, eq=False)
class StateSpaceModel:
    """x[k+1] = a x[k] + b u[k],  y[k] = c x[k] + d u[k]."""

    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    d: float = 0.0

    def __post_init__(self):
        a = np.atleast_2d(np.asarray(self.a, dtype=float))
        n = a.shape[0]
        if a.shape != (n, n) or n < 1:
            raise ValueError(f"a must be square with order >= 1, got shape {a.shape}")
        b = np.asarray(self.b, dtype=float).reshape(-1, 1)
        c = np.asarray(self.c, dtype=float).reshape(1, -1)
        if b.shape != (n, 1):
            raise ValueError(f"b must have {n} rows, got {b.shape[0]}")
        if c.shape != (1, n):
            raise ValueError(f"c must have {n} columns, got {c.shape[1]}")
        for name, arr in (("a", a), ("b", b), ("c", c)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        object.__setattr__(self, "d", float(self.d))

    @property
    def order(self) -> int:
        return self.a.shape[0]

    def __eq__(self, other):
        if not isinstance(other, StateSpaceModel):
            return NotImplemented
        return (
            self.a.shape == other.a.shape
            and np.array_equal(self.a, other.a)
            and np.array_equal(self.b, other.b)
            and np.array_equal(self.c, other.c)
            and self.d == other.d
        )

    def __hash__(self):
        return hash((self.a.tobytes(), self.b.tobytes(), self.c.tobytes(), self.d))

    def __repr__(self):
        return (
            f"StateSpaceModel(a={self.a.tolist()}, b={self.b.ravel().tolist()}, "
            f"c={self.c.ravel().tolist()}, d={self.d})"
        )


def _trim(coeffs) -> np.ndarray:
    coeffs = np.atleast_1d(np.asarray(coeffs, dtype=float))
    if coeffs.ndim != 1 or coeffs.size == 0:
        raise ValueError("coefficient list must be a non-empty 1-D sequence")
    return coeffs


def tf_to_ss(numerator, denominator) -> StateSpaceModel:
    """Controllable canonical realization of ``numerator/denominator``.

    Coefficients are given highest power of z first. A static gain (both
    polynomials of degree 0) is padded to an order-1 model with zero dynamics.
    """
    num = _trim(numerator)
    den = _trim(denominator)
    if den[0] == 0:
        raise ValueError("leading denominator coefficient must be nonzero")
    if num.size > den.size:
        raise ValueError(
            f"improper transfer function: numerator degree {num.size - 1} "
            f"exceeds denominator degree {den.size - 1}"
        )
    num = num / den[0]
    den = den / den[0]
    n = den.size - 1
    if n == 0:
        return StateSpaceModel([[0.0]], [0.0], [0.0], num[0])

    num = np.concatenate([np.zeros(n + 1 - num.size), num])
    d = num[0]
    # strictly proper remainder after one step of long division
    rem = num[1:] - d * den[1:]

    a = np.zeros((n, n))
    a[0, :] = -den[1:]
    a[1:, :-1] = np.eye(n - 1)
    b = np.zeros(n)
    b[0] = 1.0
    return StateSpaceModel(a, b, rem, d)


def lti_step(model: StateSpaceModel, x: np.ndarray, u: float) -> tuple[np.ndarray, float]:
    """Advance one sample. Returns ``(x_next, y)`` with ``y`` from the incoming state."""
    x = np.asarray(x, dtype=float)
    if x.shape != (model.order,):
        raise ValueError(f"state has shape {x.shape}, model order is {model.order}")
    y = float(model.c[0] @ x) + model.d * u
    x_next = model.a @ x + model.b[:, 0] * u
    return x_next, y


def dc_gain(model: StateSpaceModel) -> float:
    eye = np.eye(model.order)
    m = eye - model.a
    if abs(np.linalg.det(m)) < 1e-12:
        raise ValueError("system has a pole at z = 1; DC gain is undefined")
    return (model.c @ np.linalg.solve(m, model.b)).item() + model.d


def impulse_response(model: StateSpaceModel, n_samples: int) -> np.ndarray:
    x = np.zeros(model.order)
    out = np.empty(n_samples)
    for k in range(n_samples):
        x, out[k] = lti_step(model, x, 1.0 if k == 0 else 0.0)
    return out
