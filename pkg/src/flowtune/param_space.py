"""Discrete flow-parameter spaces.

A space is an ordered list of named parameters, each with a fixed list of
discrete options. Samples are stored as option indices (never values), so
every optimizer sees the same unambiguous encoding. Option values are kept
as canonical strings with a type tag; booleans and decimals therefore
survive render/parse round trips bit-exactly.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
import re
from dataclasses import dataclass
from functools import cached_property
from importlib import resources
from itertools import product
from pathlib import Path
from typing import Iterator

from .errors import FlowtuneError

CATEGORIES = ("density", "congestion", "timing", "power", "other")

DEFAULT_SPACE_RESOURCE = "default_space.json"

_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
# Reserved inside option texts: they would break `name = value` line formats.
_RESERVED_IN_OPTION = ("\n", "\r", ";")


class SpaceFileError(FlowtuneError):
    """A space file could not be parsed or violates space invariants."""


class AssignmentParseError(FlowtuneError):
    """Base class for errors while parsing a textual assignment."""

    def __init__(self, message: str, parameter: str | None = None):
        super().__init__(message)
        self.parameter = parameter


class MalformedLineError(AssignmentParseError):
    pass


class UnknownParameterError(AssignmentParseError):
    pass


class InvalidValueError(AssignmentParseError):
    pass


class DuplicateParameterError(AssignmentParseError):
    pass


class MissingParameterError(AssignmentParseError):
    pass


class InvalidSampleError(FlowtuneError):
    """A sample failed validation where a valid one was required."""


def canonical_text(value: bool | int | float | str) -> tuple[str, str]:
    """Return (kind, canonical text) for a raw option value.

    bool must be checked before int: Python bools are ints.
    Floats use repr(), the shortest round-tripping decimal form.
    """
    if isinstance(value, bool):
        return "bool", "true" if value else "false"
    if isinstance(value, int):
        return "int", str(value)
    if isinstance(value, float):
        if not math.isfinite(value):
            raise SpaceFileError(f"non-finite option value {value!r}")
        return "float", repr(value)
    if isinstance(value, str):
        return "str", value
    raise SpaceFileError(f"unsupported option value type {type(value).__name__}")


@dataclass(frozen=True)
class OptionValue:
    kind: str  # bool | int | float | str
    text: str  # canonical rendering

    @classmethod
    def from_raw(cls, value: bool | int | float | str) -> "OptionValue":
        kind, text = canonical_text(value)
        return cls(kind, text)

    def to_raw(self) -> bool | int | float | str:
        if self.kind == "bool":
            return self.text == "true"
        if self.kind == "int":
            return int(self.text)
        if self.kind == "float":
            return float(self.text)
        return self.text


@dataclass(frozen=True)
class ParameterDef:
    """One named discrete parameter with its ordered option list."""

    name: str
    category: str
    options: tuple[OptionValue, ...]

    def __post_init__(self):
        if not _NAME_RE.match(self.name):
            raise SpaceFileError(f"invalid parameter name {self.name!r}")
        if self.category not in CATEGORIES:
            raise SpaceFileError(
                f"parameter {self.name!r}: unknown category {self.category!r} "
                f"(expected one of {', '.join(CATEGORIES)})"
            )
        if not self.options:
            raise SpaceFileError(f"parameter {self.name!r}: empty option list")
        seen: set[str] = set()
        for opt in self.options:
            if opt.text == "":
                raise SpaceFileError(f"parameter {self.name!r}: empty option text")
            for ch in _RESERVED_IN_OPTION:
                if ch in opt.text:
                    raise SpaceFileError(
                        f"parameter {self.name!r}: option {opt.text!r} contains "
                        f"a reserved character"
                    )
            if opt.text in seen:
                raise SpaceFileError(
                    f"parameter {self.name!r}: duplicate option {opt.text!r}"
                )
            seen.add(opt.text)

    @property
    def n(self) -> int:
        return len(self.options)

    def option_index(self, text: str) -> int | None:
        for i, opt in enumerate(self.options):
            if opt.text == text:
                return i
        return None


@dataclass(frozen=True)
class ParameterSpace:
    """Ordered, immutable collection of parameters; defines sample order."""

    params: tuple[ParameterDef, ...]
    name: str = "unnamed"

    def __post_init__(self):
        if not self.params:
            raise SpaceFileError("a parameter space needs at least one parameter")
        seen: set[str] = set()
        for p in self.params:
            if p.name in seen:
                raise SpaceFileError(f"duplicate parameter name {p.name!r}")
            seen.add(p.name)

    @cached_property
    def _index_by_name(self) -> dict[str, int]:
        return {p.name: i for i, p in enumerate(self.params)}

    def __len__(self) -> int:
        return len(self.params)

    def param_index(self, name: str) -> int | None:
        return self._index_by_name.get(name)


@dataclass(frozen=True)
class Sample:
    """One parameter combination, stored as option indices in space order."""

    indices: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "indices", tuple(int(i) for i in self.indices))


def load_space(path: str | Path) -> ParameterSpace:
    """Load a parameter space from a JSON space file.

    The file is a single JSON document:
    {"name": ..., "parameters": [{"name", "category", "options": [...]}]}
    Option values may be booleans, integers, decimals, or strings.
    """
    path = Path(path)
    try:
        raw_text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SpaceFileError(f"cannot read space file {path}: {e}") from e
    try:
        doc = json.loads(raw_text)
    except json.JSONDecodeError as e:
        raise SpaceFileError(
            f"{path}: invalid JSON at line {e.lineno}, column {e.colno}: {e.msg}"
        ) from e
    return space_from_dict(doc, source=str(path))


def space_from_dict(doc: object, source: str = "<dict>") -> ParameterSpace:
    if not isinstance(doc, dict):
        raise SpaceFileError(f"{source}: top-level document must be an object")
    raw_params = doc.get("parameters")
    if not isinstance(raw_params, list) or not raw_params:
        raise SpaceFileError(f"{source}: 'parameters' must be a non-empty list")
    defs: list[ParameterDef] = []
    for i, entry in enumerate(raw_params):
        where = f"{source}: parameters[{i}]"
        if not isinstance(entry, dict):
            raise SpaceFileError(f"{where}: expected an object")
        name = entry.get("name")
        if not isinstance(name, str):
            raise SpaceFileError(f"{where}: missing or non-string 'name'")
        category = entry.get("category", "other")
        raw_options = entry.get("options")
        if not isinstance(raw_options, list):
            raise SpaceFileError(f"{where} ({name}): 'options' must be a list")
        try:
            options = tuple(OptionValue.from_raw(v) for v in raw_options)
            defs.append(ParameterDef(name=name, category=category, options=options))
        except SpaceFileError as e:
            raise SpaceFileError(f"{where}: {e}") from e
    space_name = doc.get("name", "unnamed")
    if not isinstance(space_name, str):
        raise SpaceFileError(f"{source}: 'name' must be a string")
    return ParameterSpace(params=tuple(defs), name=space_name)


def space_to_dict(space: ParameterSpace) -> dict:
    return {
        "name": space.name,
        "parameters": [
            {
                "name": p.name,
                "category": p.category,
                "options": [opt.to_raw() for opt in p.options],
            }
            for p in space.params
        ],
    }


def save_space(space: ParameterSpace, path: str | Path) -> None:
    Path(path).write_text(
        json.dumps(space_to_dict(space), indent=2) + "\n", encoding="utf-8"
    )


def default_space_path() -> Path:
    return Path(str(resources.files("flowtune").joinpath("data", DEFAULT_SPACE_RESOURCE)))


def load_default_space() -> ParameterSpace:
    """The bundled 27-parameter placement-tuning space."""
    return load_space(default_space_path())


def space_size(space: ParameterSpace) -> int:
    """Exact number of parameter combinations (arbitrary precision)."""
    return math.prod(p.n for p in space.params)


def space_fingerprint(space: ParameterSpace) -> str:
    """Stable hash of the space structure (names, categories, options)."""
    doc = [
        [p.name, p.category, [[o.kind, o.text] for o in p.options]]
        for p in space.params
    ]
    blob = json.dumps(doc, separators=(",", ":"), ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


def validate_sample(space: ParameterSpace, sample: Sample) -> list[str]:
    """Check a sample against a space; returns violation messages (empty = ok)."""
    if len(sample.indices) != len(space.params):
        return [
            f"sample has {len(sample.indices)} indices but the space has "
            f"{len(space.params)} parameters"
        ]
    violations: list[str] = []
    for p, idx in zip(space.params, sample.indices):
        if not 0 <= idx < p.n:
            violations.append(
                f"parameter '{p.name}': index {idx} out of range [0, {p.n})"
            )
    return violations


def require_valid(space: ParameterSpace, sample: Sample) -> None:
    violations = validate_sample(space, sample)
    if violations:
        raise InvalidSampleError("; ".join(violations))


def random_sample(space: ParameterSpace, rng: random.Random) -> Sample:
    """Draw each index independently and uniformly over its option list."""
    return Sample(tuple(rng.randrange(p.n) for p in space.params))


def enumerate_samples(space: ParameterSpace) -> Iterator[Sample]:
    """Yield every sample in the space. Caller is responsible for size checks."""
    for combo in product(*(range(p.n) for p in space.params)):
        yield Sample(combo)


def ordinal_encode(space: ParameterSpace, sample: Sample) -> tuple[float, ...]:
    """Map option indices to [0, 1]: u_i = index_i / (n_i - 1), 0 when n_i = 1."""
    require_valid(space, sample)
    return tuple(
        0.0 if p.n == 1 else idx / (p.n - 1)
        for p, idx in zip(space.params, sample.indices)
    )


def render_assignment(space: ParameterSpace, sample: Sample) -> dict[str, str]:
    """Ordered name -> canonical value text mapping for a valid sample."""
    require_valid(space, sample)
    return {
        p.name: p.options[idx].text for p, idx in zip(space.params, sample.indices)
    }


def assignment_block(space: ParameterSpace, sample: Sample) -> str:
    """One `name = value` line per parameter, in space order."""
    return "\n".join(f"{n} = {v}" for n, v in render_assignment(space, sample).items())


def assignment_line(space: ParameterSpace, sample: Sample) -> str:
    """Single-line `name = value; ...` rendering, in space order."""
    return "; ".join(f"{n} = {v}" for n, v in render_assignment(space, sample).items())


def parse_assignment(
    space: ParameterSpace, text: str, base: Sample | None = None
) -> Sample:
    """Parse `name = value` entries (newline- or semicolon-separated).

    Inverse of assignment_block/assignment_line. With a base sample,
    unassigned parameters inherit the base's indices; otherwise every
    parameter must be assigned. Raises a specific AssignmentParseError
    subclass naming the offending parameter.
    """
    if base is not None:
        require_valid(space, base)
    indices: dict[int, int] = {}
    entries = [e for line in text.splitlines() for e in line.split(";")]
    for entry in entries:
        entry = entry.strip()
        if not entry:
            continue
        if "=" not in entry:
            raise MalformedLineError(f"expected 'name = value', got {entry!r}")
        name, _, value = entry.partition("=")
        name = name.strip()
        value = value.strip()
        pidx = space.param_index(name)
        if pidx is None:
            raise UnknownParameterError(f"unknown parameter {name!r}", parameter=name)
        if pidx in indices:
            raise DuplicateParameterError(
                f"parameter {name!r} assigned more than once", parameter=name
            )
        oidx = space.params[pidx].option_index(value)
        if oidx is None:
            valid = ", ".join(o.text for o in space.params[pidx].options)
            raise InvalidValueError(
                f"parameter {name!r}: value {value!r} is not one of [{valid}]",
                parameter=name,
            )
        indices[pidx] = oidx
    if base is None:
        missing = [p.name for i, p in enumerate(space.params) if i not in indices]
        if missing:
            raise MissingParameterError(
                f"missing assignment for parameter(s): {', '.join(missing)}",
                parameter=missing[0],
            )
        return Sample(tuple(indices[i] for i in range(len(space.params))))
    if not indices:
        raise MalformedLineError("no assignments found")
    return Sample(
        tuple(indices.get(i, base.indices[i]) for i in range(len(space.params)))
    )
