"""Line-oriented experiment configuration.

::

    # comment
    [experiment]
    kind = disk-obstruction
    seed = 7

    [params]
    n_max = 6

    [field A]          # rows: slot i j value   (slot may be "0,1" for matrices)
    0 0 0 1.0

    [tensor C]         # rows: a b c value      (the (a, c, b) entry is filled with -value)
    0 1 2 1.0

    [boundary phi]     # rows: n re_1 im_1 [re_2 im_2 ...] for n >= 0
    1 0.5 0.0

Parameter values are checked against the selected kind in :mod:`nab2lab.runner`.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

import numpy as np

__all__ = ["ConfigError", "ExperimentSpec", "parse_config"]

_SECTION = re.compile(r"^\[\s*([A-Za-z_-]+)(?:\s+([A-Za-z_][A-Za-z0-9_]*))?\s*\]$")
_EXPERIMENT_KEYS = {"kind", "seed", "name"}


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line else message)
        self.line = line


@dataclass
class ExperimentSpec:
    kind: str
    seed: int = 0
    name: str = ""
    params: dict = field(default_factory=dict)       # key -> (raw value, line)
    fields: dict = field(default_factory=dict)       # name -> [(slot, i, j, value)], line
    tensors: dict = field(default_factory=dict)      # name -> [(a, b, c, value)]
    boundaries: dict = field(default_factory=dict)   # name -> {n: [complex]}
    lines: dict = field(default_factory=dict)        # section label -> header line


def _number(tok: str, line: int, kind=float):
    try:
        return kind(tok)
    except ValueError:
        raise ConfigError(f"expected {kind.__name__}, got {tok!r}", line) from None


def parse_config(text: str) -> ExperimentSpec:
    """Parses configuration text; raises :class:`ConfigError` with line numbers."""
    experiment: dict[str, tuple[str, int]] = {}
    spec = ExperimentSpec(kind="")
    section = None
    name = None
    seen_experiment = False
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        m = _SECTION.match(line)
        if m:
            section, name = m.group(1), m.group(2)
            label = f"{section} {name}" if name else section
            if section in ("experiment", "params"):
                if name:
                    raise ConfigError(f"[{section}] takes no name", lineno)
                if label in spec.lines:
                    raise ConfigError(f"duplicate section [{section}]", lineno)
                seen_experiment |= section == "experiment"
            elif section in ("field", "tensor", "boundary"):
                if not name:
                    raise ConfigError(f"[{section}] needs a name", lineno)
                taken = set(spec.fields) | set(spec.tensors) | set(spec.boundaries)
                if name in taken:
                    raise ConfigError(f"duplicate name {name!r}", lineno)
                {"field": spec.fields, "tensor": spec.tensors,
                 "boundary": spec.boundaries}[section][name] = [] if section != "boundary" else {}
            else:
                raise ConfigError(f"unknown section [{section}]", lineno)
            spec.lines[label] = lineno
            continue
        if line.startswith("["):
            raise ConfigError(f"malformed section header {line!r}", lineno)
        if section is None:
            raise ConfigError("content before the first section", lineno)
        if section in ("experiment", "params"):
            if "=" not in line:
                raise ConfigError(f"expected key = value, got {line!r}", lineno)
            key, value = (s.strip() for s in line.split("=", 1))
            if not key:
                raise ConfigError("empty key", lineno)
            target = experiment if section == "experiment" else spec.params
            if section == "experiment" and key not in _EXPERIMENT_KEYS:
                raise ConfigError(f"unknown key {key!r} in [experiment]", lineno)
            if key in target:
                raise ConfigError(f"duplicate key {key!r}", lineno)
            target[key] = (value, lineno)
            continue
        toks = line.split()
        if section == "field":
            if len(toks) != 4:
                raise ConfigError("field rows are 'slot i j value'", lineno)
            slot = tuple(_number(t, lineno, int) for t in toks[0].split(","))
            i, j = _number(toks[1], lineno, int), _number(toks[2], lineno, int)
            if i < 0 or j < 0 or any(s < 0 for s in slot):
                raise ConfigError("indices must be non-negative", lineno)
            spec.fields[name].append((slot, i, j, _number(toks[3], lineno)))
        elif section == "tensor":
            if len(toks) != 4:
                raise ConfigError("tensor rows are 'a b c value'", lineno)
            a, b, c = (_number(t, lineno, int) for t in toks[:3])
            if min(a, b, c) < 0:
                raise ConfigError("indices must be non-negative", lineno)
            spec.tensors[name].append((a, b, c, _number(toks[3], lineno)))
        else:
            if len(toks) < 3 or len(toks) % 2 == 0:
                raise ConfigError("boundary rows are 'n re im [re im ...]'", lineno)
            n = _number(toks[0], lineno, int)
            if n < 0:
                raise ConfigError("list non-negative modes only; negative ones are mirrored", lineno)
            if n in spec.boundaries[name]:
                raise ConfigError(f"duplicate mode {n}", lineno)
            vals = [_number(t, lineno) for t in toks[1:]]
            spec.boundaries[name][n] = [complex(re, im) for re, im in zip(vals[::2], vals[1::2])]
    if not seen_experiment:
        raise ConfigError("missing [experiment]")
    if "kind" not in experiment:
        raise ConfigError("[experiment] needs kind", spec.lines["experiment"])
    spec.kind = experiment["kind"][0]
    if "seed" in experiment:
        value, lineno = experiment["seed"]
        spec.seed = _number(value, lineno, int)
    spec.name = experiment.get("name", ("", 0))[0]
    return spec


def tensor_array(rows, N: int, line: int | None = None) -> np.ndarray:
    """Antisymmetric ``[N, N, N]`` array from ``(a, b, c, value)`` rows."""
    C = np.zeros((N, N, N))
    for a, b, c, v in rows:
        if max(a, b, c) >= N:
            raise ConfigError(f"tensor index out of range for N = {N}", line)
        if b == c and v != 0:
            raise ConfigError("diagonal tensor entries must vanish", line)
        for (p, q, s) in ((b, c, 1.0), (c, b, -1.0)):
            if C[a, p, q] not in (0.0, s * v):
                raise ConfigError(f"conflicting entries for ({a}, {b}, {c})", line)
            C[a, p, q] = s * v
    return C
