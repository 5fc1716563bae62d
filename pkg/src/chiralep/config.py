"""Line-oriented run configuration.

A document looks like::

    # comments start with '#'
    [encircle]
    gamma1 = 1.5e-4
    gamma2 = 8.8e-5
    loop_time = 4.78e5
    seed = 7

Exactly one ``[experiment]`` header, then ``key = value`` lines.  ``seed``,
``output_dir`` and ``format`` are global; every other key must belong to the
experiment's schema.  Values are kept as strings; ``typed()`` converts them.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

REQUIRED = object()


class ConfigError(ValueError):
    def __init__(self, message: str, line: int | None = None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class Experiment(enum.Enum):
    EP_LOCATE = "ep-locate"
    RATIO_SWEEP = "ratio-sweep"
    EIGENGAP_MAP = "map"
    ENCIRCLE = "encircle"
    LOOP_SWEEP = "loop-sweep"
    AVERAGE = "average"
    SCALING_PROBE = "scaling-probe"

    @classmethod
    def parse(cls, name: str) -> "Experiment":
        key = name.strip()
        aliases = {
            "EpLocate": "ep-locate", "RatioSweep": "ratio-sweep", "EigengapMap": "map",
            "Encircle": "encircle", "LoopSweep": "loop-sweep", "Average": "average",
            "ScalingProbe": "scaling-probe",
        }
        try:
            return cls(aliases.get(key, key.lower()))
        except ValueError:
            raise ConfigError(f"unknown experiment {name!r}") from None


def _float(text):
    value = float(text)
    if not math.isfinite(value):
        raise ValueError("not finite")
    return value


def _opt_float(text):
    return None if text == "" else _float(text)


def _int(text):
    return int(text)


def _float_list(text):
    if text == "":
        return []
    return [_float(part) for part in text.split(",")]


def _vec3(text):
    parts = [complex(p.strip().replace(" ", "")) for p in text.split(",")]
    if len(parts) != 3:
        raise ValueError("need three components")
    return parts


def _choice(*options):
    def parse(text):
        if text not in options:
            raise ValueError(f"expected one of {', '.join(options)}")
        return text

    parse.__name__ = "one of " + "|".join(options)
    return parse


_ENANTIOMER = _choice("R", "L")
_DIRECTION = _choice("as_written", "reversed")
_INITIAL = _choice("plus", "minus", "mixed")
_AXIS = _choice("gamma1", "gamma2", "delta", "omega12")

_LOOP_KEYS = {
    "gamma1": (_float, "1.5e-4"),
    "gamma2": (_float, "8.8e-5"),
    "raman": (_opt_float, ""),
    "initial": (_INITIAL, "plus"),
    "center_delta": (_opt_float, ""),
    "center_omega": (_opt_float, ""),
    "radius": (_opt_float, ""),
    "phase": (_float, "0"),
    "rel_tol": (_float, "1e-10"),
    "abs_tol": (_float, "1e-12"),
}

SCHEMAS: dict[Experiment, dict[str, tuple]] = {
    Experiment.EP_LOCATE: {
        "gamma1": (_float, REQUIRED),
        "gamma2": (_opt_float, ""),
        "ratio": (_opt_float, ""),
    },
    Experiment.RATIO_SWEEP: {
        "gamma1": (_float, "6.2e-3"),
        "ratios": (_float_list, "0,0.25,0.5,0.75,1,1.25,1.5,1.75,2,2.25,2.5,3"),
    },
    Experiment.EIGENGAP_MAP: {
        "gamma1": (_float, REQUIRED),
        "gamma2": (_float, REQUIRED),
        "delta": (_float, "0"),
        "omega12": (_float, "0"),
        "x_axis": (_AXIS, "delta"),
        "y_axis": (_AXIS, "omega12"),
        "x_min": (_opt_float, ""),
        "x_max": (_opt_float, ""),
        "x_count": (_int, "101"),
        "y_min": (_opt_float, ""),
        "y_max": (_opt_float, ""),
        "y_count": (_int, "101"),
    },
    Experiment.ENCIRCLE: {
        **_LOOP_KEYS,
        "enantiomer": (_ENANTIOMER, "R"),
        "direction": (_DIRECTION, "as_written"),
        "loop_time": (_float, "4.78e5"),
        "samples": (_int, "2048"),
        "min_samples": (_int, "4096"),
    },
    Experiment.LOOP_SWEEP: {
        **_LOOP_KEYS,
        "loop_times": (_float_list, ""),
        "t_min": (_float, "1e3"),
        "t_max": (_float, "4.78e5"),
        "t_count": (_int, "12"),
        "samples": (_int, "256"),
        "workers": (_int, "1"),
    },
    Experiment.AVERAGE: {
        "d1e": (_vec3, "1,0,0"),
        "d2e": (_vec3, "0,1,0"),
        "d12": (_vec3, "0,0,1"),
        "f1": (_vec3, "1,0,0"),
        "f2": (_vec3, "0,1,0"),
        "f3": (_vec3, "0,0,1"),
        "omega1": (_float, "0.5"),
        "omega2": (_float, "0.3"),
        "omega3": (_float, "0.2"),
        "e1": (_float, "0"),
        "e2": (_float, "0.2"),
        "mc_samples": (_int, "100000"),
        "shards": (_int, "1"),
    },
    Experiment.SCALING_PROBE: {
        "gamma1": (_float, REQUIRED),
        "gamma2": (_float, REQUIRED),
        "enantiomer": (_ENANTIOMER, "R"),
        "branch": (_choice("0", "1"), "0"),
        "angle": (_float, "0.3"),
        "eps_min": (_float, "1e-6"),
        "eps_max": (_float, "1e-4"),
        "eps_count": (_int, "21"),
    },
}

FORMATS = ("csv", "json", "both")
GLOBAL_KEYS = ("seed", "output_dir", "format")


@dataclass(frozen=True)
class RunConfig:
    experiment: Experiment
    parameters: dict = field(default_factory=dict)
    seed: int = 0
    output_dir: str = "out"
    output_format: str = "both"

    def typed(self) -> dict:
        schema = SCHEMAS[self.experiment]
        return {key: schema[key][0](value) for key, value in self.parameters.items()}


def _check_value(key, parser, value, line):
    try:
        parser(value)
    except (ValueError, TypeError) as exc:
        kind = getattr(parser, "__name__", "value").lstrip("_")
        raise ConfigError(f"key {key!r} expects {kind}, got {value!r} ({exc})", line) from None


def _check_seed(value, line):
    try:
        seed = int(value)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {value!r}", line) from None
    if not 0 <= seed < 2**64:
        raise ConfigError("seed must fit in an unsigned 64-bit integer", line)
    return seed


def build_config(
    experiment: Experiment,
    entries: dict[str, tuple[str, int | None]],
) -> RunConfig:
    """Validate ``key -> (value, line)`` entries and fill defaults."""
    schema = SCHEMAS[experiment]
    params = {}
    seed, output_dir, fmt = 0, "out", "both"
    for key, (value, line) in entries.items():
        if key == "seed":
            seed = _check_seed(value, line)
        elif key == "output_dir":
            output_dir = value
        elif key == "format":
            if value not in FORMATS:
                raise ConfigError(f"format must be one of {', '.join(FORMATS)}", line)
            fmt = value
        elif key in schema:
            _check_value(key, schema[key][0], value, line)
            params[key] = value
        else:
            raise ConfigError(f"unknown key {key!r} for experiment {experiment.value}", line)
    for key, (parser, default) in schema.items():
        if key in params:
            continue
        if default is REQUIRED:
            raise ConfigError(f"missing required key {key!r}")
        params[key] = default
    return RunConfig(experiment, dict(sorted(params.items())), seed, output_dir, fmt)


def read_entries(text: str):
    """Return ``(experiment or None, {key: (value, line)})`` from a document."""
    experiment = None
    entries: dict[str, tuple[str, int]] = {}
    for number, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if line.startswith("["):
            if not line.endswith("]"):
                raise ConfigError("malformed experiment header", number)
            if experiment is not None:
                raise ConfigError("more than one experiment header", number)
            if entries:
                raise ConfigError("experiment header must precede keys", number)
            experiment = Experiment.parse(line[1:-1])
            continue
        if "=" not in line:
            raise ConfigError(f"expected 'key = value', got {raw.strip()!r}", number)
        key, value = (part.strip() for part in line.split("=", 1))
        if not key:
            raise ConfigError("empty key", number)
        if key in entries:
            first = entries[key][1]
            raise ConfigError(f"duplicate key {key!r} (lines {first} and {number})", number)
        entries[key] = (value, number)
    return experiment, entries


def parse_config(
    text: str,
    experiment: Experiment | str | None = None,
    overrides: dict[str, str] | None = None,
) -> RunConfig:
    """Parse a document; ``overrides`` (e.g. command-line flags) win over file values."""
    found, entries = read_entries(text)
    if isinstance(experiment, str):
        experiment = Experiment.parse(experiment)
    if found is not None and experiment is not None and found is not experiment:
        raise ConfigError(f"document is for {found.value!r}, not {experiment.value!r}")
    experiment = experiment or found
    if experiment is None:
        raise ConfigError("no experiment given")
    for key, value in (overrides or {}).items():
        entries[key] = (str(value), None)
    return build_config(experiment, entries)


def serialize_config(config: RunConfig) -> str:
    lines = [
        f"[{config.experiment.value}]",
        f"seed = {config.seed}",
        f"output_dir = {config.output_dir}",
        f"format = {config.output_format}",
    ]
    lines += [f"{key} = {value}" for key, value in sorted(config.parameters.items())]
    return "\n".join(lines) + "\n"
