"""Structured RTL summaries via a pluggable chat provider.

Two schemas: a six-field per-module summary and a ten-field whole-design
summary. Responses are requested as one fenced block of `key: value` lines;
malformed replies trigger a repair prompt that quotes the reply and restates
the schema. The rendered design summary text is the embedding input, so its
field order is fixed and rendering is deterministic.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path
from typing import Protocol, Sequence

from .errors import FlowtuneError, TransportError
from .rtl_ingest import (
    DEFAULT_MODULE_TOKEN_LIMIT,
    DesignSource,
    RtlModuleSource,
    chunk_text,
)

MODULE_SUMMARY_FIELDS = (
    "inputs",
    "outputs",
    "overall_functionality",
    "critical_submodules",
    "design_choices",
    "timing_constraints",
)

DESIGN_SUMMARY_FIELDS = (
    "design_name",
    "design_functionality",
    "primary_inputs",
    "primary_outputs",
    "key_design_characteristics",
    "key_modules_and_functionalities",
    "module_interactions",
    "design_optimizations",
    "potential_applications",
    "timing_considerations",
)

_FIELD_HINTS = {
    "inputs": "the module's input signals and what they carry",
    "outputs": "the module's output signals and what they carry",
    "overall_functionality": "what the module computes or controls",
    "critical_submodules": "instantiated submodules that shape behavior, or none",
    "design_choices": "notable implementation decisions such as encodings, "
    "pipelining, or resource sharing",
    "timing_constraints": "clocking, resets, and timing-sensitive behavior, or none",
    "design_name": "a short descriptive name for the design",
    "design_functionality": "what the design does end to end",
    "primary_inputs": "top-level input interfaces",
    "primary_outputs": "top-level output interfaces",
    "key_design_characteristics": "architecture traits that distinguish the design",
    "key_modules_and_functionalities": "the main modules and their roles",
    "module_interactions": "how the modules connect and exchange data",
    "design_optimizations": "optimizations present in the implementation",
    "potential_applications": "where this design would plausibly be used",
    "timing_considerations": "clock domains, latency, and timing-critical paths",
}

SYSTEM_PROMPT = (
    "You are a senior digital design engineer. You read Verilog or "
    "SystemVerilog source code and write precise structured summaries for a "
    "design-retrieval database. Always respond with exactly one fenced code "
    "block containing one 'key: value' line per requested field, in the "
    "requested order, and nothing outside the block."
)

DEFAULT_MAX_RETRIES = 2

_FENCE_RE = re.compile(r"```[^\n]*\n(.*?)```", re.DOTALL)
_KEY_LINE_RE = re.compile(r"^([A-Za-z][A-Za-z0-9 _-]*?)\s*:\s*(.*)$")


class SummaryParseError(FlowtuneError):
    """The provider's reply never matched the schema, even after repairs."""

    def __init__(self, message: str, raw_response: str = ""):
        super().__init__(message)
        self.raw_response = raw_response


class ChatProvider(Protocol):
    """Chat-completion abstraction (OpenAI-style message list in, text out)."""

    def chat(self, messages: list[dict[str, str]]) -> str: ...

    def fingerprint(self) -> str: ...


def _clean_field(text: str) -> str:
    """Single-line, single-spaced field text; empty collapses to 'none'."""
    cleaned = " ".join(text.split())
    return cleaned if cleaned else "none"


@dataclass(frozen=True)
class ModuleSummary:
    module_name: str
    inputs: str
    outputs: str
    overall_functionality: str
    critical_submodules: str
    design_choices: str
    timing_constraints: str

    def __post_init__(self):
        for f in MODULE_SUMMARY_FIELDS:
            object.__setattr__(self, f, _clean_field(getattr(self, f)))

    def content_fields(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in MODULE_SUMMARY_FIELDS}

    @classmethod
    def from_fields(cls, module_name: str, mapping: dict[str, str]) -> "ModuleSummary":
        return cls(module_name=module_name, **{f: mapping[f] for f in MODULE_SUMMARY_FIELDS})


@dataclass(frozen=True)
class DesignSummary:
    design_name: str
    design_functionality: str
    primary_inputs: str
    primary_outputs: str
    key_design_characteristics: str
    key_modules_and_functionalities: str
    module_interactions: str
    design_optimizations: str
    potential_applications: str
    timing_considerations: str

    def __post_init__(self):
        for f in DESIGN_SUMMARY_FIELDS:
            object.__setattr__(self, f, _clean_field(getattr(self, f)))

    def content_fields(self) -> dict[str, str]:
        return {f: getattr(self, f) for f in DESIGN_SUMMARY_FIELDS}

    @classmethod
    def from_fields(cls, mapping: dict[str, str]) -> "DesignSummary":
        return cls(**{f: mapping[f] for f in DESIGN_SUMMARY_FIELDS})


@dataclass(frozen=True)
class SummarizerConfig:
    max_retries: int = DEFAULT_MAX_RETRIES
    chunk_token_limit: int = DEFAULT_MODULE_TOKEN_LIMIT


# --- prompt construction (pure functions; golden-file stable) ---------------


def _schema_lines(keys: Sequence[str]) -> str:
    return "\n".join(f"- {k}: {_FIELD_HINTS[k]}" for k in keys)


def _format_instruction(keys: Sequence[str]) -> str:
    return (
        "Answer with one fenced code block containing exactly these keys, "
        "one 'key: value' line each, in this order: " + ", ".join(keys) + "."
    )


def module_summary_prompt(module: RtlModuleSource) -> list[dict[str, str]]:
    user = (
        "Summarize the RTL module below for a design-retrieval database.\n\n"
        "Required fields:\n"
        f"{_schema_lines(MODULE_SUMMARY_FIELDS)}\n\n"
        f"Module source (from {module.file_path}):\n"
        "```verilog\n"
        f"{module.source_text.rstrip()}\n"
        "```\n\n"
        f"{_format_instruction(MODULE_SUMMARY_FIELDS)}"
    )
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def chunk_summary_prompt(
    module_name: str, chunk_index: int, n_chunks: int, chunk: str
) -> list[dict[str, str]]:
    user = (
        f"The RTL module '{module_name}' is too large to read at once; this is "
        f"part {chunk_index + 1} of {n_chunks}. Summarize only what this part "
        "shows.\n\n"
        "Required fields:\n"
        f"{_schema_lines(MODULE_SUMMARY_FIELDS)}\n\n"
        "Module source part:\n"
        "```verilog\n"
        f"{chunk.rstrip()}\n"
        "```\n\n"
        f"{_format_instruction(MODULE_SUMMARY_FIELDS)}"
    )
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def merge_chunks_prompt(
    module_name: str, chunk_summaries: Sequence[ModuleSummary]
) -> list[dict[str, str]]:
    rendered = "\n\n".join(
        f"Part {i + 1}:\n{render_module_summary_text(s)}"
        for i, s in enumerate(chunk_summaries)
    )
    user = (
        f"Below are partial summaries of consecutive parts of the RTL module "
        f"'{module_name}'. Merge them into one summary of the whole module.\n\n"
        f"{rendered}\n\n"
        f"{_format_instruction(MODULE_SUMMARY_FIELDS)}"
    )
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def design_summary_prompt(
    design_id: str, summaries: Sequence[ModuleSummary]
) -> list[dict[str, str]]:
    rendered = "\n\n".join(render_module_summary_text(s) for s in summaries)
    user = (
        f"Below are structured summaries of every module in the design "
        f"'{design_id}'. Combine them into one whole-design summary.\n\n"
        "Required fields:\n"
        f"{_schema_lines(DESIGN_SUMMARY_FIELDS)}\n\n"
        "Module summaries:\n"
        f"{rendered}\n\n"
        f"{_format_instruction(DESIGN_SUMMARY_FIELDS)}"
    )
    return [
        {"role": "system", "content": SYSTEM_PROMPT},
        {"role": "user", "content": user},
    ]


def repair_prompt(raw_response: str, reason: str, keys: Sequence[str]) -> dict[str, str]:
    return {
        "role": "user",
        "content": (
            f"Your previous reply could not be parsed: {reason}\n"
            "Previous reply:\n"
            f"{raw_response}\n\n"
            "Reply again following the format exactly. "
            f"{_format_instruction(keys)}"
        ),
    }


# --- response parsing --------------------------------------------------------


def _normalize_key(key: str) -> str:
    return key.strip().lower().replace(" ", "_").replace("-", "_")


def extract_fenced_block(text: str) -> str | None:
    """Last fenced code block in the text, or None."""
    blocks = _FENCE_RE.findall(text)
    return blocks[-1] if blocks else None


class _ParseFailure(Exception):
    def __init__(self, reason: str):
        super().__init__(reason)
        self.reason = reason


def _parse_key_values(body: str, keys: Sequence[str]) -> dict[str, str]:
    """Parse `key: value` lines; non-key lines continue the previous value."""
    expected = set(keys)
    found: dict[str, list[str]] = {}
    current: str | None = None
    for line in body.splitlines():
        stripped = line.strip()
        if not stripped:
            continue
        m = _KEY_LINE_RE.match(stripped)
        key = _normalize_key(m.group(1)) if m else None
        if key in expected:
            if key in found:
                raise _ParseFailure(f"field '{key}' appears more than once")
            found[key] = [m.group(2).strip()]
            current = key
        elif current is not None:
            found[current].append(stripped)
        else:
            raise _ParseFailure(
                f"text before the first field line: {stripped[:80]!r}"
            )
    missing = [k for k in keys if k not in found]
    if missing:
        raise _ParseFailure(f"missing field(s): {', '.join(missing)}")
    return {k: " ".join(v).strip() for k, v in found.items()}


def parse_structured_response(text: str, keys: Sequence[str]) -> dict[str, str]:
    """Extract and parse the schema block from a raw chat response."""
    block = extract_fenced_block(text)
    if block is None:
        raise _ParseFailure("no fenced code block found")
    return _parse_key_values(block, keys)


def _request_structured(
    provider: ChatProvider,
    messages: list[dict[str, str]],
    keys: Sequence[str],
    max_retries: int,
) -> dict[str, str]:
    """Chat until the reply parses, repairing up to max_retries times."""
    conversation = list(messages)
    transport_failures = 0
    last_raw = ""
    attempts = max_retries + 1
    for _ in range(attempts):
        try:
            raw = provider.chat(conversation)
        except TransportError:
            transport_failures += 1
            if transport_failures >= attempts:
                raise
            continue
        last_raw = raw
        try:
            return parse_structured_response(raw, keys)
        except _ParseFailure as pf:
            conversation.append({"role": "assistant", "content": raw})
            conversation.append(repair_prompt(raw, pf.reason, keys))
    raise SummaryParseError(
        f"response did not match the schema after {max_retries} repair attempt(s)",
        raw_response=last_raw,
    )


# --- high-level operations ---------------------------------------------------


def summarize_module(
    provider: ChatProvider,
    module: RtlModuleSource,
    config: SummarizerConfig | None = None,
) -> ModuleSummary:
    """Produce the six-field summary for one module.

    Oversized modules are split into chunks, summarized chunk-wise, and the
    chunk summaries merged with one final call.
    """
    config = config or SummarizerConfig()
    if module.approx_tokens <= config.chunk_token_limit:
        fields = _request_structured(
            provider,
            module_summary_prompt(module),
            MODULE_SUMMARY_FIELDS,
            config.max_retries,
        )
        return ModuleSummary.from_fields(module.module_name, fields)
    chunks = chunk_text(module.source_text, config.chunk_token_limit)
    partials: list[ModuleSummary] = []
    for i, chunk in enumerate(chunks):
        fields = _request_structured(
            provider,
            chunk_summary_prompt(module.module_name, i, len(chunks), chunk),
            MODULE_SUMMARY_FIELDS,
            config.max_retries,
        )
        partials.append(ModuleSummary.from_fields(module.module_name, fields))
    merged = _request_structured(
        provider,
        merge_chunks_prompt(module.module_name, partials),
        MODULE_SUMMARY_FIELDS,
        config.max_retries,
    )
    return ModuleSummary.from_fields(module.module_name, merged)


def synthesize_design_summary(
    provider: ChatProvider,
    summaries: Sequence[ModuleSummary],
    design_id: str,
    config: SummarizerConfig | None = None,
) -> DesignSummary:
    if not summaries:
        raise FlowtuneError("cannot synthesize a design summary from zero modules")
    config = config or SummarizerConfig()
    fields = _request_structured(
        provider,
        design_summary_prompt(design_id, summaries),
        DESIGN_SUMMARY_FIELDS,
        config.max_retries,
    )
    return DesignSummary.from_fields(fields)


def summarize_design(
    provider: ChatProvider,
    design: DesignSource,
    config: SummarizerConfig | None = None,
) -> tuple[DesignSummary, list[ModuleSummary]]:
    """Full pipeline: per-module summaries, then the design-level synthesis."""
    config = config or SummarizerConfig()
    module_summaries = [
        summarize_module(provider, m, config) for m in design.modules
    ]
    design_summary = synthesize_design_summary(
        provider, module_summaries, design.design_id, config
    )
    return design_summary, module_summaries


# --- canonical renderings and persistence ------------------------------------


def render_summary_text(summary: DesignSummary) -> str:
    """The exact string handed to the embedding model. Fixed field order."""
    return "\n".join(
        f"{k}: {v}" for k, v in summary.content_fields().items()
    )


def render_module_summary_text(summary: ModuleSummary) -> str:
    lines = [f"module_name: {summary.module_name}"]
    lines.extend(f"{k}: {v}" for k, v in summary.content_fields().items())
    return "\n".join(lines)


def save_design_summary(summary: DesignSummary, path: str | Path) -> None:
    Path(path).write_text(render_summary_text(summary) + "\n", encoding="utf-8")


def load_design_summary(path: str | Path) -> DesignSummary:
    text = Path(path).read_text(encoding="utf-8")
    try:
        fields = _parse_key_values(text, DESIGN_SUMMARY_FIELDS)
    except _ParseFailure as pf:
        raise SummaryParseError(
            f"{path}: not a valid design summary file: {pf.reason}",
            raw_response=text,
        ) from pf
    return DesignSummary.from_fields(fields)


def save_module_summary(summary: ModuleSummary, path: str | Path) -> None:
    Path(path).write_text(
        render_module_summary_text(summary) + "\n", encoding="utf-8"
    )


def load_module_summary(path: str | Path) -> ModuleSummary:
    text = Path(path).read_text(encoding="utf-8")
    try:
        fields = _parse_key_values(
            text, ("module_name",) + MODULE_SUMMARY_FIELDS
        )
    except _ParseFailure as pf:
        raise SummaryParseError(
            f"{path}: not a valid module summary file: {pf.reason}",
            raw_response=text,
        ) from pf
    return ModuleSummary.from_fields(fields.pop("module_name"), fields)
