"""Scenario files: JSON schema, validation with line numbers, and object construction."""
from __future__ import annotations

import json
import json.decoder
import json.scanner
from dataclasses import dataclass, field
from pathlib import Path

import jsonschema

from .continuum import ContinuumModel, Profile, Term
from .model import CrawlerModel, Friction, Spring, StructuralError
from .solver import SolverConfig
from .timeprog import TimeProgram


class ScenarioError(ValueError):
    """Invalid scenario file; the message carries ``path:line``."""


_program = {
    "oneOf": [
        {"type": "number"},
        {"type": "object",
         "required": ["breakpoints"],
         "properties": {
             "breakpoints": {"type": "array", "minItems": 2,
                             "items": {"type": "array", "minItems": 2, "maxItems": 2,
                                       "items": {"type": "number"}}},
             "period": {"type": ["number", "null"], "exclusiveMinimum": 0}},
         "additionalProperties": False},
    ]
}

_profile = {
    "oneOf": [
        {"type": "number"},
        {"type": "object", "required": ["breaks", "values"],
         "properties": {"breaks": {"type": "array", "items": {"type": "number"}, "minItems": 2},
                        "values": {"type": "array", "items": {"type": "number"}, "minItems": 1}},
         "additionalProperties": False},
    ]
}

_terms = {
    "oneOf": [
        {"type": "number", "minimum": 0},
        {"type": "array", "minItems": 1,
         "items": {"type": "object", "required": ["program", "profile"],
                   "properties": {"program": _program, "profile": _profile},
                   "additionalProperties": False}},
    ]
}

MODEL_SCHEMA = {
    "type": "object",
    "required": ["points", "springs", "friction"],
    "properties": {
        "points": {"type": "array", "items": {"type": "number"}, "minItems": 2},
        "springs": {"type": "array", "minItems": 1,
                    "items": {"type": "object", "required": ["i", "j", "k", "L"],
                              "properties": {"i": {"type": "integer", "minimum": 0},
                                             "j": {"type": "integer", "minimum": 0},
                                             "k": {"type": "number", "exclusiveMinimum": 0},
                                             "L": _program},
                              "additionalProperties": False}},
        "friction": {"type": "array", "minItems": 2,
                     "items": {"type": "object", "required": ["mu_minus", "mu_plus"],
                               "properties": {"mu_minus": _program, "mu_plus": _program,
                                              "weight": {"type": "number", "exclusiveMinimum": 0}},
                               "additionalProperties": False}},
    },
    "additionalProperties": False,
}

CONTINUUM_SCHEMA = {
    "type": "object",
    "required": ["domain", "stiffness", "distortion", "mu_minus", "mu_plus"],
    "properties": {
        "domain": {"type": "array", "items": {"type": "number"}, "minItems": 2, "maxItems": 2},
        "n_elements": {"type": "integer", "minimum": 1},
        "stiffness": _profile,
        "distortion": {"type": "array", "items": {"type": "object",
                                                  "required": ["program", "profile"],
                                                  "properties": {"program": _program,
                                                                 "profile": _profile},
                                                  "additionalProperties": False}},
        "mu_minus": _terms,
        "mu_plus": _terms,
        "period": {"type": ["number", "null"], "exclusiveMinimum": 0},
    },
    "additionalProperties": False,
}

ORACLE_SCHEMA = {
    "type": "object",
    "required": ["kind", "params"],
    "properties": {
        "kind": {"enum": ["two_point_constant", "three_point_regime",
                          "continuum_homogeneous", "strategy"]},
        "params": {"type": "object"},
    },
    "additionalProperties": False,
}

OUTPUTS = ["trajectory_csv", "summary_json", "stasis_json", "plotdata"]

SCENARIO_SCHEMA = {
    "type": "object",
    "properties": {
        "name": {"type": "string"},
        "model": MODEL_SCHEMA,
        "continuum": CONTINUUM_SCHEMA,
        "solver": {
            "type": "object",
            "properties": {
                "steps_per_unit_time": {"type": "integer", "minimum": 1},
                "event_align": {"type": "boolean"},
                "prox_tol": {"type": "number", "exclusiveMinimum": 0},
                "max_inner_iters": {"type": "integer", "minimum": 1},
                "tie_break": {"oneOf": [{"enum": ["midpoint", "min_norm"]},
                                        {"type": "number", "minimum": 0, "maximum": 1}]},
                "inner": {"enum": ["active_set", "fista"]},
            },
            "additionalProperties": False,
        },
        "initial_state": {"oneOf": [{"enum": ["relaxed", "max_compression", "max_elongation"]},
                                    {"type": "array", "items": {"type": "number"}}]},
        "t0": {"type": "number"},
        "t1": {"type": "number"},
        "period": {"type": "number", "exclusiveMinimum": 0},
        "stasis_times": {"type": "array", "items": {"type": "number"}},
        "outputs": {"type": "array", "items": {"enum": OUTPUTS}, "uniqueItems": True},
        "oracle": ORACLE_SCHEMA,
    },
    "oneOf": [{"required": ["model"]}, {"required": ["continuum"]}],
    "additionalProperties": False,
}


# -- JSON with source positions -------------------------------------------------------

class _PositionDecoder(json.JSONDecoder):
    """Decoder remembering the source offset of every object and array."""

    def __init__(self):
        super().__init__()
        self.offsets: dict[int, int] = {}
        self._keep = []

        def parse_object(s_and_end, *args):
            obj, end = json.decoder.JSONObject(s_and_end, *args)
            self._remember(obj, s_and_end[1] - 1)
            return obj, end

        def parse_array(s_and_end, *args):
            arr, end = json.decoder.JSONArray(s_and_end, *args)
            self._remember(arr, s_and_end[1] - 1)
            return arr, end

        self.parse_object = parse_object
        self.parse_array = parse_array
        self.scan_once = json.scanner.py_make_scanner(self)

    def _remember(self, obj, offset):
        self._keep.append(obj)
        self.offsets[id(obj)] = offset


def _line_of(text: str, offset: int) -> int:
    return text.count("\n", 0, max(0, offset)) + 1


def locate(text: str, data, offsets: dict[int, int], path) -> int:
    """Best line number for a JSON path (deepest container, then the key)."""
    node, offset = data, offsets.get(id(data), 0)
    for key in path:
        child = None
        if isinstance(node, dict) and key in node:
            child = node[key]
            pos = text.find(json.dumps(key), offset)
            if pos >= 0:
                offset = pos
        elif isinstance(node, list) and isinstance(key, int) and key < len(node):
            child = node[key]
        if child is None:
            break
        offset = offsets.get(id(child), offset)
        node = child
    return _line_of(text, offset)


def load_json(path) -> dict:
    """Parse and validate a scenario file, raising :class:`ScenarioError` with a line number."""
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ScenarioError(f"{path}: cannot read ({exc.strerror})") from exc
    dec = _PositionDecoder()
    try:
        data = dec.decode(text)
    except json.JSONDecodeError as exc:
        raise ScenarioError(f"{path}:{exc.lineno}: invalid JSON: {exc.msg}") from exc
    validator = jsonschema.Draft202012Validator(SCENARIO_SCHEMA)
    errors = sorted(validator.iter_errors(data), key=lambda e: len(e.absolute_path), reverse=True)
    if errors:
        err = errors[0]
        line = locate(text, data, dec.offsets, list(err.absolute_path))
        where = "/".join(str(p) for p in err.absolute_path) or "<root>"
        raise ScenarioError(f"{path}:{line}: {where}: {err.message}")
    return data


# -- construction -------------------------------------------------------------------------

def program(data) -> TimeProgram:
    return TimeProgram.from_json(data)


def profile(data, a: float, b: float) -> Profile:
    if isinstance(data, (int, float)):
        return Profile.constant(a, b, float(data))
    return Profile(data["breaks"], data["values"])


def build_model(data: dict) -> CrawlerModel:
    springs = tuple(Spring(s["i"], s["j"], float(s["k"]), program(s["L"])) for s in data["springs"])
    friction = tuple(Friction(program(f["mu_minus"]), program(f["mu_plus"]),
                              float(f.get("weight", 1.0))) for f in data["friction"])
    return CrawlerModel(data["points"], springs, friction)


def _build_terms(data, a, b, period):
    if isinstance(data, (int, float)):
        one = TimeProgram.constant(1.0, 0.0, period or 1.0, True)
        return (Term(one, Profile.constant(a, b, float(data))),)
    return tuple(Term(program(t["program"]), profile(t["profile"], a, b)) for t in data)


def build_continuum(data: dict) -> ContinuumModel:
    a, b = (float(v) for v in data["domain"])
    period = data.get("period")
    distortion = tuple(Term(program(t["program"]), profile(t["profile"], a, b))
                       for t in data["distortion"])
    if period is None and distortion:
        period = distortion[0].program.period
    return ContinuumModel(a, b, profile(data["stiffness"], a, b), distortion,
                          _build_terms(data["mu_minus"], a, b, period),
                          _build_terms(data["mu_plus"], a, b, period),
                          int(data.get("n_elements", 100)), period)


@dataclass
class Scenario:
    name: str
    model: CrawlerModel
    solver: SolverConfig
    initial_state: object
    t0: float
    t1: float
    period: float | None = None
    outputs: list[str] = field(default_factory=lambda: ["trajectory_csv", "summary_json"])
    stasis_times: list[float] = field(default_factory=list)
    oracle: dict | None = None
    continuum: ContinuumModel | None = None


def build_scenario(data: dict, source: str = "<scenario>", steps: int | None = None,
                   elements: int | None = None) -> Scenario:
    """Scenario object from validated JSON data (optional CLI overrides)."""
    solver_opts = dict(data.get("solver", {}))
    if steps is not None:
        solver_opts["steps_per_unit_time"] = steps
    try:
        cfg = SolverConfig(**solver_opts)
        cont = None
        if "continuum" in data:
            cont = build_continuum(data["continuum"])
            if elements is not None:
                cont = cont.with_elements(elements)
            from .continuum import discretize
            model = discretize(cont)
            period = data.get("period", cont.period)
        else:
            model = build_model(data["model"])
            period = data.get("period")
    except (StructuralError, ValueError) as exc:
        raise ScenarioError(f"{source}: {exc}") from exc
    t0 = float(data.get("t0", 0.0))
    t1 = float(data.get("t1", t0 + (period or 1.0)))
    if not t1 > t0:
        raise ScenarioError(f"{source}: t1 must exceed t0")
    init = data.get("initial_state", "relaxed")
    if isinstance(init, list) and len(init) != model.n_points:
        raise ScenarioError(f"{source}: initial_state needs {model.n_points} entries")
    return Scenario(data.get("name", Path(source).stem), model, cfg, init, t0, t1, period,
                    list(data.get("outputs", ["trajectory_csv", "summary_json"])),
                    [float(t) for t in data.get("stasis_times", [t0])], data.get("oracle"), cont)


def load_scenario(path, steps: int | None = None, elements: int | None = None) -> Scenario:
    return build_scenario(load_json(path), str(path), steps, elements)
