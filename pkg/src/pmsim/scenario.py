"""Line-oriented scenario files describing a full ``SimConfig``.

Example::

    # posture and movement with an anticipatory adjustment
    [posture]
    apa = pulse 3 5 -0.5

    [movement]
    target = pulse 5 7 5

Omitted keys take the built-in `posture` defaults. Unknown sections or keys,
duplicates and malformed values are errors carrying the offending line.
"""

from __future__ import annotations

import re

from . import engine
from . import signals as sig
from .kalman import NoiseModel

SECTIONS = {
    "simulation": ("ts", "duration"),
    "plant": ("num", "den", "x0"),
    "posture": ("target", "apa", "kp", "ki", "kd", "n", "qw", "rv", "g", "h"),
    "movement": ("target", "apa", "kp", "ki", "kd", "n", "qw", "rv", "g", "h"),
    "disturbance": ("signal",),
}

_HEADER = re.compile(r"^\[\s*([A-Za-z_][\w-]*)\s*\]$")
_ENTRY = re.compile(r"^([A-Za-z_][\w-]*)\s*=\s*(.*)$")


class ScenarioError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        self.reason = message
        super().__init__(f"line {line}: {message}" if line else message)


def _read(text: str) -> dict[str, dict[str, tuple[str, int]]]:
    doc: dict[str, dict[str, tuple[str, int]]] = {}
    section = None
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _HEADER.match(line)
        if m:
            section = m.group(1)
            if section not in SECTIONS:
                raise ScenarioError(f"unknown section [{section}]", lineno)
            if section in doc:
                raise ScenarioError(f"section [{section}] appears twice", lineno)
            doc[section] = {}
            continue
        m = _ENTRY.match(line)
        if not m:
            raise ScenarioError(f"expected '[section]' or 'key = value', got {line!r}", lineno)
        key, value = m.group(1), m.group(2).strip()
        if section is None:
            raise ScenarioError(f"key {key!r} appears before any section header", lineno)
        if key not in SECTIONS[section]:
            raise ScenarioError(f"unknown key {key!r} in [{section}]", lineno)
        if key in doc[section]:
            raise ScenarioError(f"duplicate key {key!r} in [{section}]", lineno)
        if not value:
            raise ScenarioError(f"missing value for {key!r}", lineno)
        doc[section][key] = (value, lineno)
    return doc


class _Getter:
    def __init__(self, doc):
        self.doc = doc

    def line(self, section, key):
        entry = self.doc.get(section, {}).get(key)
        return entry[1] if entry else None

    def _raw(self, section, key):
        return self.doc.get(section, {}).get(key)

    def number(self, section, key, default):
        entry = self._raw(section, key)
        if entry is None:
            return default
        text, lineno = entry
        try:
            return sig.parse_number(text)
        except sig.SignalSyntaxError as exc:
            raise ScenarioError(f"{key}: {exc}", lineno) from None

    def numbers(self, section, key, default):
        entry = self._raw(section, key)
        if entry is None:
            return default
        text, lineno = entry
        try:
            return tuple(sig.parse_number(tok) for tok in text.split())
        except sig.SignalSyntaxError as exc:
            raise ScenarioError(f"{key}: {exc}", lineno) from None

    def signal(self, section, key, default):
        entry = self._raw(section, key)
        if entry is None:
            return default
        text, lineno = entry
        try:
            return sig.parse_signal(text)
        except sig.SignalSyntaxError as exc:
            raise ScenarioError(f"{key}: {exc}", lineno) from None


def parse_scenario(text: str) -> engine.SimConfig:
    doc = _read(text)
    get = _Getter(doc)

    num = get.numbers("plant", "num", engine.BUILTIN_NUM)
    den = get.numbers("plant", "den", engine.BUILTIN_DEN)
    den_line = get.line("plant", "den") or get.line("plant", "num")
    if len(den) < 2:
        raise ScenarioError("plant denominator must have degree >= 1", den_line)
    if len(num) > len(den):
        raise ScenarioError(
            f"improper plant: num has {len(num)} coefficients, den only {len(den)}", den_line
        )
    if den[0] == 0:
        raise ScenarioError("leading denominator coefficient must be nonzero", den_line)
    order = len(den) - 1

    x0 = get.numbers("plant", "x0", (0.0,) * order)
    if len(x0) != order:
        raise ScenarioError(f"x0 needs {order} values", get.line("plant", "x0") or den_line)

    defaults = engine.builtin_config("posture")
    loops = {}
    for name in engine.LOOP_NAMES:
        base = getattr(defaults, name)
        g = get.numbers(name, "g", (engine.BUILTIN_G,) * order)
        if len(g) != order:
            raise ScenarioError(f"g needs {order} values", get.line(name, "g") or den_line)
        try:
            noise = NoiseModel(
                g,
                h=get.number(name, "h", engine.BUILTIN_H),
                qw=get.number(name, "qw", engine.BUILTIN_QW),
                rv=get.number(name, "rv", engine.BUILTIN_RV),
            )
        except ValueError as exc:
            raise ScenarioError(str(exc), get.line(name, "qw") or get.line(name, "rv")) from None
        loops[name] = engine.LoopConfig(
            name,
            target=get.signal(name, "target", base.target),
            injection=get.signal(name, "apa", base.injection),
            kp=get.number(name, "kp", base.kp),
            ki=get.number(name, "ki", base.ki),
            kd=get.number(name, "kd", base.kd),
            filter_n=get.number(name, "n", base.filter_n),
            noise=noise,
        )
        try:
            loops[name].pid(1.0)
        except ValueError as exc:
            raise ScenarioError(str(exc), get.line(name, "n") or get.line(name, "kd")) from None

    ts = get.number("simulation", "ts", engine.BUILTIN_TS)
    duration = get.number("simulation", "duration", engine.BUILTIN_DURATION)
    try:
        config = engine.SimConfig(
            ts=ts,
            duration=duration,
            plant_num=num,
            plant_den=den,
            posture=loops["posture"],
            movement=loops["movement"],
            disturbance=get.signal("disturbance", "signal", sig.ZERO),
            x0=x0,
        )
        for loop in config.loops:
            loop.kalman(config.plant)
    except (ValueError, RuntimeError) as exc:
        line = get.line("simulation", "ts") or get.line("simulation", "duration")
        raise ScenarioError(str(exc), line) from None
    return config


def _num(x):
    return sig.format_number(x)


def _nums(xs):
    return " ".join(_num(x) for x in xs)


def serialize_scenario(config: engine.SimConfig) -> str:
    """Canonical text for ``config``; ``parse_scenario`` maps it back exactly."""
    if config.mismatched_loops or any(lp.internal_model is not None for lp in config.loops):
        raise ValueError("scenario files cannot express a separate internal model")
    lines = [
        "[simulation]",
        f"ts = {_num(config.ts)}",
        f"duration = {_num(config.duration)}",
        "",
        "[plant]",
        f"num = {_nums(config.plant_num)}",
        f"den = {_nums(config.plant_den)}",
        f"x0 = {_nums(config.x0)}",
    ]
    for loop in config.loops:
        lines += [
            "",
            f"[{loop.name}]",
            f"target = {sig.format_signal(loop.target)}",
            f"apa = {sig.format_signal(loop.injection)}",
            f"kp = {_num(loop.kp)}",
            f"ki = {_num(loop.ki)}",
            f"kd = {_num(loop.kd)}",
            f"n = {_num(loop.filter_n)}",
            f"qw = {_num(loop.noise.qw)}",
            f"rv = {_num(loop.noise.rv)}",
            f"g = {_nums(loop.noise.g.ravel())}",
            f"h = {_num(loop.noise.h)}",
        ]
    lines += ["", "[disturbance]", f"signal = {sig.format_signal(config.disturbance)}"]
    return "\n".join(lines) + "\n"
