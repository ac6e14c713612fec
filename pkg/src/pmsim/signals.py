"""Declarative time-domain signals for planner targets, APA and disturbances.

Signals are immutable values. Their textual form, used in scenario files, is::

    constant V
    step T0 V
    pulse T0 T1 V
    sum( <signal> ; <signal> ; ... )
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union


@dataclass(frozen=True)
class Constant:
    value: float

    def __call__(self, t: float) -> float:
        return self.value


@dataclass(frozen=True)
class Step:
    onset: float
    amplitude: float

    def __call__(self, t: float) -> float:
        return self.amplitude if t >= self.onset else 0.0


@dataclass(frozen=True)
class Pulse:
    """Rectangular pulse active on the half-open window ``[onset, offset)``."""

    onset: float
    offset: float
    amplitude: float

    def __post_init__(self):
        if not self.onset < self.offset:
            raise ValueError(
                f"pulse onset ({self.onset}) must be before offset ({self.offset})"
            )

    def __call__(self, t: float) -> float:
        return self.amplitude if self.onset <= t < self.offset else 0.0


@dataclass(frozen=True)
class Sum:
    terms: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))

    def __call__(self, t: float) -> float:
        total = 0.0
        for term in self.terms:
            total += term(t)
        return total


Signal = Union[Constant, Step, Pulse, Sum]

ZERO = Constant(0.0)


def eval_signal(spec: Signal, t: float) -> float:
    if t < 0:
        raise ValueError(f"signals are defined for t >= 0, got {t}")
    return spec(t)


def sample_signal(spec: Signal, ts: float, duration: float) -> list[float]:
    """Sample ``spec`` at ``t = k*ts`` for ``k = 0 .. floor(duration/ts)``."""
    if not ts > 0:
        raise ValueError(f"ts must be positive, got {ts}")
    if not duration > 0:
        raise ValueError(f"duration must be positive, got {duration}")
    return [spec(k * ts) for k in range(grid_length(ts, duration))]


def grid_length(ts: float, duration: float) -> int:
    # ratios such as 10/0.1 land a hair under the integer
    return math.floor(duration / ts + 1e-9) + 1


def snap(spec: Signal, ts: float) -> Signal:
    """Move every event time of ``spec`` onto the grid ``k*ts``."""

    def to_grid(t):
        return round(t / ts) * ts

    if isinstance(spec, Step):
        return Step(to_grid(spec.onset), spec.amplitude)
    if isinstance(spec, Pulse):
        return Pulse(to_grid(spec.onset), to_grid(spec.offset), spec.amplitude)
    if isinstance(spec, Sum):
        return Sum(tuple(snap(term, ts) for term in spec.terms))
    return spec


def event_times(spec: Signal) -> list[float]:
    if isinstance(spec, Step):
        return [spec.onset]
    if isinstance(spec, Pulse):
        return [spec.onset, spec.offset]
    if isinstance(spec, Sum):
        return [t for term in spec.terms for t in event_times(term)]
    return []


def format_number(x: float) -> str:
    # repr is the shortest string that round-trips
    return repr(float(x))


def format_signal(spec: Signal) -> str:
    if isinstance(spec, Constant):
        return f"constant {format_number(spec.value)}"
    if isinstance(spec, Step):
        return f"step {format_number(spec.onset)} {format_number(spec.amplitude)}"
    if isinstance(spec, Pulse):
        return "pulse {} {} {}".format(
            format_number(spec.onset),
            format_number(spec.offset),
            format_number(spec.amplitude),
        )
    if isinstance(spec, Sum):
        return "sum(" + " ; ".join(format_signal(t) for t in spec.terms) + ")"
    raise TypeError(f"not a signal: {spec!r}")


class SignalSyntaxError(ValueError):
    pass


_TOKEN = re.compile(r"\s*(\(|\)|;|[^\s();]+)")


def _tokenize(text: str) -> list[str]:
    tokens = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise SignalSyntaxError(f"unexpected character at {text[pos:]!r}")
        tokens.append(m.group(1))
        pos = m.end()
    return tokens


def parse_number(token: str) -> float:
    try:
        value = float(token)
    except ValueError:
        raise SignalSyntaxError(f"malformed number {token!r}") from None
    if not math.isfinite(value):
        raise SignalSyntaxError(f"non-finite number {token!r}")
    return value


def parse_signal(text: str) -> Signal:
    """Parse the textual signal form. Raises ``SignalSyntaxError``."""
    tokens = _tokenize(text)
    if not tokens:
        raise SignalSyntaxError("empty signal")
    spec, pos = _parse(tokens, 0)
    if pos != len(tokens):
        raise SignalSyntaxError(f"trailing input {' '.join(tokens[pos:])!r}")
    return spec


_ARITY = {"constant": 1, "step": 2, "pulse": 3}


def _parse(tokens, pos):
    if pos >= len(tokens):
        raise SignalSyntaxError("unexpected end of signal")
    head = tokens[pos]
    if head == "sum":
        return _parse_sum(tokens, pos + 1)
    if head not in _ARITY:
        raise SignalSyntaxError(f"unknown signal kind {head!r}")
    n = _ARITY[head]
    args = tokens[pos + 1 : pos + 1 + n]
    if len(args) < n or any(a in "();" for a in args):
        raise SignalSyntaxError(f"{head} takes {n} number(s)")
    values = [parse_number(a) for a in args]
    try:
        if head == "constant":
            spec = Constant(*values)
        elif head == "step":
            spec = Step(*values)
        else:
            spec = Pulse(*values)
    except ValueError as exc:
        raise SignalSyntaxError(str(exc)) from None
    return spec, pos + 1 + n


def _parse_sum(tokens, pos):
    if pos >= len(tokens) or tokens[pos] != "(":
        raise SignalSyntaxError("sum must be followed by '('")
    pos += 1
    terms = []
    if pos < len(tokens) and tokens[pos] == ")":
        return Sum(()), pos + 1
    while True:
        term, pos = _parse(tokens, pos)
        terms.append(term)
        if pos >= len(tokens):
            raise SignalSyntaxError("unclosed sum(")
        if tokens[pos] == ")":
            return Sum(tuple(terms)), pos + 1
        if tokens[pos] != ";":
            raise SignalSyntaxError(f"expected ';' or ')' in sum, got {tokens[pos]!r}")
        pos += 1
