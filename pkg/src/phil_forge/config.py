"""JSON run configuration with located error messages.

Every section is optional and missing fields take their library defaults.
Scenario fields may also be given at the top level, e.g. ``{"scr": 2}``.
The ``derived`` block written by :meth:`RunConfig.dump` is informational and
ignored on input, so a dumped configuration loads back unchanged.
"""
from __future__ import annotations

import dataclasses
import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .circuits import DelaySpec, PhilScenario
from .errors import ConfigParseError, ConfigValidationError
from .interfaces import ITM_DEFAULT_CUTOFF
from .plant import Objective, ScalingSpec, WeightSpec
from .synthesis import SynthesisOptions

__all__ = ["RunConfig", "load_config", "parse_config", "DEFAULT_SCR_VALUES"]

DEFAULT_SCR_VALUES = (0.1, 1.0, 2.0, 5.0, 200.0)

_SECTIONS = ("scenario", "scaling", "weights", "synthesis", "itm", "simulation",
             "sweep", "validation", "objective", "output_dir", "derived")


@dataclass(frozen=True)
class RunConfig:
    scenario: PhilScenario = field(default_factory=PhilScenario)
    scaling: ScalingSpec = field(default_factory=ScalingSpec)
    weights: WeightSpec = field(default_factory=WeightSpec)
    synthesis: SynthesisOptions = field(default_factory=SynthesisOptions)
    objective: Objective = Objective.TRANSPARENCY
    itm_cutoff: float = ITM_DEFAULT_CUTOFF
    duration: float = 1.0
    settle_fraction: float = 0.5
    scr_values: tuple = DEFAULT_SCR_VALUES
    f_max: float = 1000.0
    n_points: int = 500
    output_dir: str = "phil_forge_out"

    def dump(self) -> dict:
        """Plain-dict view of the resolved configuration, derived values included."""
        sc = dataclasses.asdict(self.scenario)
        return {
            "scenario": sc,
            "derived": {"rated_power": self.scenario.rated_power},
            "scaling": dataclasses.asdict(self.scaling),
            "weights": dataclasses.asdict(self.weights),
            "synthesis": dataclasses.asdict(self.synthesis),
            "objective": self.objective.value,
            "itm": {"filter_cutoff": self.itm_cutoff},
            "simulation": {"duration": self.duration, "settle_fraction": self.settle_fraction},
            "sweep": {"scr_values": list(self.scr_values)},
            "validation": {"f_max": self.f_max, "n_points": self.n_points},
            "output_dir": self.output_dir,
        }


class _Locator:
    """Best-effort line lookup for a key in the raw JSON text."""

    def __init__(self, text: str):
        self.text = text

    def line(self, key: str):
        m = re.search(r'"%s"\s*:' % re.escape(key), self.text)
        return None if m is None else self.text.count("\n", 0, m.start()) + 1


def _section(data, name, loc):
    value = data.get(name, {})
    if not isinstance(value, dict):
        raise ConfigValidationError(name, "must be a JSON object", loc.line(name))
    return value


def _build(cls, values: dict, where: str, loc: _Locator, extra=None):
    """Instantiate a config dataclass, turning constructor errors into located ones."""
    names = {f.name for f in dataclasses.fields(cls)}
    for key in values:
        if key not in names:
            raise ConfigValidationError(f"{where}.{key}", "unknown field", loc.line(key))
    kwargs = dict(values)
    if extra:
        kwargs.update(extra)
    for key, value in kwargs.items():
        if isinstance(value, list):
            kwargs[key] = tuple(value)
        elif isinstance(value, bool) or value is None:
            continue
        elif isinstance(value, (int, float)) and not math.isfinite(value):
            raise ConfigValidationError(f"{where}.{key}", "must be finite", loc.line(key))
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        field_name = _guess_field(str(exc), kwargs) or where
        line = loc.line(field_name) if field_name != where else None
        raise ConfigValidationError(f"{where}.{field_name}" if field_name != where else where,
                                    str(exc), line) from exc


def _guess_field(message, kwargs):
    for key in sorted(kwargs, key=len, reverse=True):
        if key in message:
            return key
    return None


_SCENARIO_FIELDS = {f.name for f in dataclasses.fields(PhilScenario)}


def _number(data, key, default, loc, positive=True, integer=False):
    value = data.get(key, default)
    ok = isinstance(value, (int, float)) and not isinstance(value, bool) and math.isfinite(value)
    if integer:
        ok = ok and float(value).is_integer()
    if not ok or (positive and value <= 0):
        kind = "a positive integer" if integer else "a positive number" if positive else "a number"
        raise ConfigValidationError(key, f"must be {kind}", loc.line(key))
    return int(value) if integer else float(value)


def parse_config(text: str) -> RunConfig:
    """Validate a JSON document and resolve defaults."""
    try:
        data = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigParseError(exc.msg, exc.lineno, exc.colno) from exc
    loc = _Locator(text)
    if not isinstance(data, dict):
        raise ConfigValidationError("<root>", "configuration must be a JSON object", 1)
    for key in data:
        if key not in _SECTIONS and key not in _SCENARIO_FIELDS:
            raise ConfigValidationError(key, "unknown field", loc.line(key))

    sc = dict(_section(data, "scenario", loc))
    for key in _SCENARIO_FIELDS & set(data):
        sc[key] = data[key]
    delays = sc.pop("delays", {})
    if not isinstance(delays, dict):
        raise ConfigValidationError("scenario.delays", "must be a JSON object", loc.line("delays"))
    for key in ("scr", "v_grid_rms", "f0", "shunt_resistance", "dut_resistance", "sample_time"):
        if key in sc:
            _number(sc, key, None, loc)
    delay_spec = _build(DelaySpec, delays, "scenario.delays", loc)
    scenario = _build(PhilScenario, sc, "scenario", loc, {"delays": delay_spec})

    scaling = _build(ScalingSpec, _section(data, "scaling", loc), "scaling", loc)
    weights = _build(WeightSpec, _section(data, "weights", loc), "weights", loc)
    try:
        weights.check_nyquist(scenario.sample_time)
    except ValueError as exc:
        raise ConfigValidationError("weights", str(exc), loc.line("weights")) from exc
    synthesis = _build(SynthesisOptions, _section(data, "synthesis", loc), "synthesis", loc)

    objective = data.get("objective", Objective.TRANSPARENCY.value)
    try:
        objective = Objective(objective)
    except ValueError as exc:
        raise ConfigValidationError("objective", "must be 'transparency' or 'accuracy'",
                                    loc.line("objective")) from exc

    itm = _section(data, "itm", loc)
    cutoff = _number(itm, "filter_cutoff", ITM_DEFAULT_CUTOFF, loc)
    if cutoff >= 0.5 / scenario.sample_time:
        raise ConfigValidationError("itm.filter_cutoff", "must lie below the Nyquist frequency",
                                    loc.line("filter_cutoff"))

    sim = _section(data, "simulation", loc)
    duration = _number(sim, "duration", 1.0, loc, positive=False)
    if duration < 0:
        raise ConfigValidationError("simulation.duration", "must be nonnegative", loc.line("duration"))
    settle = _number(sim, "settle_fraction", 0.5, loc, positive=False)
    if not 0.0 <= settle < 1.0:
        raise ConfigValidationError("simulation.settle_fraction", "must lie in [0, 1)",
                                    loc.line("settle_fraction"))

    sweep = _section(data, "sweep", loc)
    scr_values = sweep.get("scr_values", list(DEFAULT_SCR_VALUES))
    if (not isinstance(scr_values, list)
            or not all(isinstance(s, (int, float)) and not isinstance(s, bool) and s > 0
                       for s in scr_values)):
        raise ConfigValidationError("sweep.scr_values", "must be a list of positive numbers",
                                    loc.line("scr_values"))

    val = _section(data, "validation", loc)
    f_max = _number(val, "f_max", 1000.0, loc)
    n_points = _number(val, "n_points", 500, loc, integer=True)

    out = data.get("output_dir", "phil_forge_out")
    if not isinstance(out, str) or not out:
        raise ConfigValidationError("output_dir", "must be a non-empty string", loc.line("output_dir"))

    return RunConfig(scenario, scaling, weights, synthesis, objective, cutoff, duration, settle,
                     tuple(float(s) for s in scr_values), f_max, n_points, out)


def load_config(path) -> RunConfig:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigParseError(f"cannot read {path}: {exc.strerror}") from exc
    return parse_config(text)
