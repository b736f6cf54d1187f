"""
Config Loader: parses and validates run-config files

Format: flat `key = value` lines, `#` comments, repeated `[objective]` blocks and an
optional `[matrix]` block of `row = ...` lines. Top-level keys come first; a `[run]`
header switches back to them.
"""

import logging
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union

from jsonschema import Draft7Validator

from .algorithms import Algorithm
from .compression import Compressor, CompressorKind
from .engine import RANDOM_QUADRATIC, ObjectiveSpec, RunConfig, TopologySpec, validate_run_config
from adc_dgd.utils.error_handling import (
    ConfigError, ErrorLocation, ErrorReporter, MatrixValidationError, SimulationError,
)

logger = logging.getLogger(__name__)

DEFAULTS: Dict[str, Any] = {
    "matrix": "metropolis",
    "t": 1,
    "compressor": "round",
    "delta": 1.0,
    "levels": 16,
    "bound": 16.0,
    "gamma": 1.0,
    "alpha": 0.02,
    "eta": 0.0,
    "P": 1,
    "K": 1000,
    "T": 1,
    "seed": 0,
    "overflow": "terminate",
    "allow_small_gamma": False,
    "allow_inadmissible_step": False,
    "label": "",
}

RUN_CONFIG_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["topology", "n", "algorithm"],
    "properties": {
        "topology": {"enum": ["ring", "star", "path", "edges"]},
        "n": {"type": "integer", "minimum": 1},
        "edges": {"type": "array", "minItems": 1,
                  "items": {"type": "string", "pattern": r"^\d+-\d+$"}},
        "matrix": {"enum": ["metropolis", "explicit"]},
        "algorithm": {"enum": [a.value for a in Algorithm]},
        "t": {"type": "integer", "minimum": 1},
        "compressor": {"enum": [c.value for c in CompressorKind]},
        "delta": {"type": "number", "exclusiveMinimum": 0},
        "levels": {"type": "integer", "minimum": 1, "maximum": 32767},
        "bound": {"type": "number", "exclusiveMinimum": 0},
        "level_table": {"type": "array", "minItems": 2, "maxItems": 32768,
                        "items": {"type": "number", "minimum": 0}},
        "gamma": {"type": "number", "exclusiveMinimum": 0},
        "alpha": {"type": "number", "minimum": 0},
        "eta": {"type": "number", "minimum": 0},
        "P": {"type": "integer", "minimum": 1},
        "K": {"type": "integer", "minimum": 1},
        "T": {"type": "integer", "minimum": 1},
        "seed": {"type": "integer", "minimum": 0},
        "overflow": {"enum": ["terminate", "raise"]},
        "allow_small_gamma": {"type": "boolean"},
        "allow_inadmissible_step": {"type": "boolean"},
        "label": {"type": "string"},
    },
}

OBJECTIVE_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "properties": {
        "a": {"type": "number"},
        "b": {"type": "array", "minItems": 1, "items": {"type": "number"}},
        "offset": {"type": "number"},
        "generator": {"enum": [RANDOM_QUADRATIC]},
    },
    "oneOf": [
        {"required": ["a", "b"], "not": {"required": ["generator"]}},
        {"required": ["generator"], "not": {"anyOf": [{"required": ["a"]}, {"required": ["b"]}]}},
    ],
}

MATRIX_SCHEMA = {
    "type": "object",
    "additionalProperties": False,
    "required": ["row"],
    "properties": {
        "row": {"type": "array", "minItems": 1,
                "items": {"type": "array", "minItems": 1, "items": {"type": "number"}}},
    },
}

# values that are always lists, even with a single item
LIST_KEYS = {"edges", "b", "row", "level_table"}
# values kept verbatim
STRING_KEYS = {"label"}
SECTIONS = ("run", "objective", "matrix")

_TRUE = {"true", "yes", "on"}
_FALSE = {"false", "no", "off"}


@dataclass
class Section:
    """One block of key = value lines with the line each key came from"""
    name: str
    line: int
    values: Dict[str, Any] = field(default_factory=dict)
    lines: Dict[str, int] = field(default_factory=dict)


@dataclass
class ParsedConfig:
    run: Section
    objectives: List[Section]
    matrix: Optional[Section]
    source: Optional[str] = None


def _scalar(text: str) -> Any:
    low = text.lower()
    if low in _TRUE:
        return True
    if low in _FALSE:
        return False
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(Fraction(text))
    except (ValueError, ZeroDivisionError):
        pass
    try:
        return float(text)
    except ValueError:
        return text


def _coerce(key: str, raw: str) -> Any:
    if key in STRING_KEYS:
        return raw
    if key in LIST_KEYS:
        items = [part.strip() for part in raw.split(",")]
        return [_scalar(item) for item in items if item]
    return _scalar(raw)


class ConfigLoader:
    """Loads and validates run configurations"""

    def load(self, path: Union[str, Path]) -> RunConfig:
        path = Path(path)
        if not path.exists():
            raise ConfigError(f"Config file not found: {path}")
        try:
            text = path.read_text()
        except OSError as e:
            raise ConfigError(f"Error reading {path}: {e}") from e
        return self.loads(text, source=str(path))

    def loads(self, text: str, source: Optional[str] = None) -> RunConfig:
        parsed = self.parse(text, source)
        self._validate_schema(parsed)
        return self._build(parsed)

    def parse(self, text: str, source: Optional[str] = None) -> ParsedConfig:
        """Split text into sections; no type checking beyond scalar coercion"""
        run = Section("run", 0)
        objectives: List[Section] = []
        matrix: Optional[Section] = None
        current = run
        for lineno, raw_line in enumerate(text.splitlines(), 1):
            line = raw_line.split("#", 1)[0].strip()
            if not line:
                continue
            loc = ErrorLocation(line=lineno, column=1, file=source, context=raw_line.strip())
            if line.startswith("["):
                if not line.endswith("]"):
                    raise ConfigError("Unterminated section header", location=loc)
                name = line[1:-1].strip().lower()
                if name not in SECTIONS:
                    raise ConfigError(f"Unknown section '[{name}]'", location=loc,
                                      suggestion="use [objective], [matrix] or [run]")
                if name == "objective":
                    current = Section(name, lineno)
                    objectives.append(current)
                elif name == "matrix":
                    if matrix is not None:
                        raise ConfigError("Only one [matrix] block is allowed", location=loc)
                    matrix = current = Section(name, lineno)
                else:
                    current = run
                continue
            if "=" not in line:
                raise ConfigError("Expected 'key = value'", location=loc)
            key, value = (part.strip() for part in line.split("=", 1))
            if not key:
                raise ConfigError("Missing key before '='", location=loc)
            if not value:
                raise ConfigError(f"Missing value for '{key}'", key=key, location=loc)
            coerced = _coerce(key, value)
            if current.name == "matrix" and key == "row":
                current.values.setdefault("row", []).append(coerced)
                current.lines.setdefault("row", lineno)
                continue
            if key in current.values:
                raise ConfigError(f"Duplicate key '{key}'", key=key, location=loc)
            current.values[key] = coerced
            current.lines[key] = lineno
        return ParsedConfig(run=run, objectives=objectives, matrix=matrix, source=source)

    def _location(self, section: Section, key: Optional[str], source: Optional[str]) -> ErrorLocation:
        line = section.lines.get(key, section.line) if key else section.line
        return ErrorLocation(line=max(line, 1), column=1, file=source)

    def _schema_errors(self, schema: Dict[str, Any], section: Section, source: Optional[str],
                       reporter: ErrorReporter):
        validator = Draft7Validator(schema)
        for error in sorted(validator.iter_errors(section.values), key=lambda e: list(e.path)):
            if error.validator == "additionalProperties":
                known = set(schema["properties"])
                for key in sorted(set(section.values) - known):
                    reporter.add_error(ConfigError(
                        f"Unknown key '{key}' in [{section.name}]", key=key,
                        location=self._location(section, key, source)))
                continue
            if error.validator == "required":
                key = error.message.split("'")[1]
                reporter.add_error(ConfigError(
                    f"Missing required key '{key}' in [{section.name}]", key=key,
                    location=self._location(section, None, source)))
                continue
            key = str(error.path[0]) if error.path else None
            reporter.add_error(ConfigError(
                f"Invalid value in [{section.name}]: {error.message}", key=key,
                location=self._location(section, key, source)))

    def _validate_schema(self, parsed: ParsedConfig):
        reporter = ErrorReporter()
        self._schema_errors(RUN_CONFIG_SCHEMA, parsed.run, parsed.source, reporter)
        for section in parsed.objectives:
            self._schema_errors(OBJECTIVE_SCHEMA, section, parsed.source, reporter)
        if parsed.matrix is not None:
            self._schema_errors(MATRIX_SCHEMA, parsed.matrix, parsed.source, reporter)
        if reporter.has_errors():
            logger.debug("Config rejected:\n%s", reporter.format_errors())
        reporter.raise_if_errors()

    def _build(self, parsed: ParsedConfig) -> RunConfig:
        run = parsed.run
        src = parsed.source
        values = {**DEFAULTS, **run.values}

        def fail(message: str, key: Optional[str], section: Section = run, suggestion: Optional[str] = None):
            raise ConfigError(message, key=key, location=self._location(section, key, src),
                              suggestion=suggestion)

        edges: Tuple[Tuple[int, int], ...] = ()
        if values["topology"] == "edges":
            if "edges" not in run.values:
                fail("topology = edges needs an 'edges' list such as '0-1, 1-2'", "topology")
            edges = tuple(tuple(int(p) for p in e.split("-")) for e in run.values["edges"])
        elif "edges" in run.values:
            fail(f"'edges' is only used with topology = edges, not '{values['topology']}'", "edges")
        topology = TopologySpec(values["topology"], int(values["n"]), edges)
        try:
            graph = topology.build()
        except SimulationError as e:
            fail(e.message, "n" if values["topology"] != "edges" else "edges")

        matrix = None
        if parsed.matrix is not None:
            if "matrix" in run.values and values["matrix"] != "explicit":
                fail("A [matrix] block requires matrix = explicit", "matrix")
            matrix = tuple(tuple(float(v) for v in row) for row in parsed.matrix.values["row"])
        elif values["matrix"] == "explicit":
            fail("matrix = explicit needs a [matrix] block", "matrix")

        objectives = self._objectives(parsed, graph.n)

        try:
            compressor = self._compressor(values)
        except SimulationError as e:
            fail(e.message, "compressor")

        algorithm = Algorithm(values["algorithm"])
        if "t" in run.values and algorithm is not Algorithm.DGD_T:
            fail("'t' only applies to algorithm = dgd_t", "t")

        config = RunConfig(
            topology=topology,
            algorithm=algorithm,
            matrix=matrix,
            objectives=objectives,
            t=int(values["t"]),
            compressor=compressor,
            gamma=float(values["gamma"]),
            alpha0=float(values["alpha"]),
            eta=float(values["eta"]),
            dim=int(values["P"]),
            iters=int(values["K"]),
            trials=int(values["T"]),
            master_seed=int(values["seed"]),
            overflow_policy=values["overflow"],
            allow_small_gamma=values["allow_small_gamma"],
            allow_inadmissible_step=values["allow_inadmissible_step"],
            label=values["label"],
        )
        try:
            config.consensus_matrix(graph)
            config.objective_set(0)
            validate_run_config(config)
        except ConfigError as e:
            key = e.key if e.key in run.values else None
            if e.key in ("b", "objective") and parsed.objectives:
                raise ConfigError(e.message, key=e.key,
                                  location=self._location(parsed.objectives[0], e.key, src),
                                  suggestion=e.suggestion) from e
            raise ConfigError(e.message, key=e.key, location=self._location(run, key, src) if key else None,
                              suggestion=e.suggestion) from e
        except MatrixValidationError as e:
            section = parsed.matrix if parsed.matrix is not None else run
            raise ConfigError(str(e).splitlines()[0], key="matrix",
                              location=self._location(section, "row", src)) from e
        except SimulationError as e:
            raise ConfigError(e.message, suggestion=e.suggestion) from e
        return config

    def _objectives(self, parsed: ParsedConfig, n: int):
        blocks = parsed.objectives
        if not blocks:
            return RANDOM_QUADRATIC
        generators = [b for b in blocks if "generator" in b.values]
        if generators:
            if len(blocks) != 1:
                raise ConfigError("A generator block must be the only [objective] block", key="generator",
                                  location=self._location(generators[0], "generator", parsed.source))
            return generators[0].values["generator"]
        if len(blocks) != n:
            raise ConfigError(f"{len(blocks)} [objective] blocks given for n = {n} nodes", key="objective",
                              location=self._location(blocks[-1], None, parsed.source))
        return tuple(ObjectiveSpec(float(b.values["a"]), tuple(float(v) for v in b.values["b"]),
                                   float(b.values.get("offset", 0.0))) for b in blocks)

    def _compressor(self, values: Dict[str, Any]) -> Compressor:
        kind = CompressorKind(values["compressor"])
        table = values.get("level_table")
        table = None if table is None else tuple(float(a) for a in table)
        if kind is CompressorKind.GRID:
            return Compressor(kind, delta=values["delta"], table=table)
        if kind is CompressorKind.SPARSIFY:
            return Compressor(kind, levels=int(values["levels"]), bound=values["bound"], table=table)
        return Compressor(kind, table=table)


def parse_config(path: Union[str, Path]) -> RunConfig:
    return ConfigLoader().load(path)


def parse_config_text(text: str, source: Optional[str] = None) -> RunConfig:
    return ConfigLoader().loads(text, source)


def resolved_items(config: RunConfig) -> List[Tuple[str, str]]:
    """Every config key with its effective value, defaults included"""
    comp = config.compressor
    if isinstance(config.objectives, str):
        objectives = f"generator = {config.objectives}"
    else:
        objectives = "; ".join(f"a={o.a:g}, b={','.join(f'{v:g}' for v in o.b)}"
                               + (f", offset={o.offset:g}" if o.offset else "") for o in config.objectives)
    items = [
        ("topology", config.topology.kind),
        ("n", str(config.topology.n)),
    ]
    if config.topology.edges:
        items.append(("edges", ", ".join(f"{u}-{v}" for u, v in config.topology.edges)))
    items += [
        ("matrix", "metropolis" if config.matrix is None else "explicit"),
        ("algorithm", config.algorithm.value),
        ("t", str(config.t)),
        ("compressor", comp.kind.value),
        ("delta", f"{comp.delta:g}"),
        ("levels", str(comp.levels)),
        ("bound", f"{comp.bound:g}"),
    ]
    if comp.table is not None:
        items.append(("level_table", ", ".join(f"{a:g}" for a in comp.table)))
    items += [
        ("gamma", f"{config.gamma:g}"),
        ("alpha", f"{config.alpha0:g}"),
        ("eta", f"{config.eta:g}"),
        ("P", str(config.dim)),
        ("K", str(config.iters)),
        ("T", str(config.trials)),
        ("seed", str(config.master_seed)),
        ("overflow", config.overflow_policy),
        ("allow_small_gamma", str(config.allow_small_gamma).lower()),
        ("allow_inadmissible_step", str(config.allow_inadmissible_step).lower()),
        ("label", config.name),
        ("objectives", objectives),
    ]
    return items
