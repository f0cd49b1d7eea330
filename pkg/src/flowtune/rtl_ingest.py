"""Scanning RTL source trees into per-module summarization units.

Extraction is lexical, not a Verilog parse: we only need module boundaries,
so a comment- and string-aware scan for module/endmodule keywords is enough.
Anything before the first module (includes, defines, package imports) is
attached to every module as a shared context prefix.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import FlowtuneError

DEFAULT_RTL_EXTENSIONS = (".v", ".sv")

# Budget above which a module is summarized chunk-wise.
DEFAULT_MODULE_TOKEN_LIMIT = 24_000

_IDENT_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_$]*|\\[^ \t\r\n]+")


class RtlScanError(FlowtuneError):
    """RTL source could not be split into modules."""


@dataclass(frozen=True)
class RtlModuleSource:
    """One module's text (with shared preamble) ready for summarization."""

    module_name: str
    source_text: str
    file_path: str
    approx_tokens: int

    def __post_init__(self):
        if not self.source_text:
            raise RtlScanError(f"module {self.module_name!r}: empty source text")


@dataclass(frozen=True)
class DesignSource:
    design_id: str
    modules: tuple[RtlModuleSource, ...]
    top_module: str | None = None

    def __post_init__(self):
        if not self.modules:
            raise RtlScanError(f"design {self.design_id!r}: no modules")
        seen: set[str] = set()
        for m in self.modules:
            if m.module_name in seen:
                raise RtlScanError(
                    f"design {self.design_id!r}: duplicate module "
                    f"{m.module_name!r}"
                )
            seen.add(m.module_name)


def estimate_tokens(text: str) -> int:
    """Cheap deterministic token estimate: ceil(utf-8 bytes / 4)."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def _code_regions(text: str):
    """Yield (start, end) spans of text that are code.

    Skips line comments, block comments, and double-quoted strings so that
    keywords inside them are never treated as module boundaries.
    """
    i, n = 0, len(text)
    region_start = 0
    while i < n:
        ch = text[i]
        if ch == "/" and i + 1 < n and text[i + 1] == "/":
            yield region_start, i
            i = text.find("\n", i + 2)
            i = n if i == -1 else i + 1
            region_start = i
        elif ch == "/" and i + 1 < n and text[i + 1] == "*":
            yield region_start, i
            end = text.find("*/", i + 2)
            if end == -1:
                i = n
            else:
                i = end + 2
            region_start = i
        elif ch == '"':
            yield region_start, i
            i += 1
            while i < n:
                if text[i] == "\\":
                    i += 2
                elif text[i] == '"':
                    i += 1
                    break
                else:
                    i += 1
            region_start = i
        else:
            i += 1
    if region_start < n:
        yield region_start, n


_KEYWORD_RE = re.compile(r"\b(module|macromodule|endmodule)\b")


def _keyword_events(text: str) -> list[tuple[int, int, str]]:
    """(start, end, keyword) for every module keyword in code regions."""
    events: list[tuple[int, int, str]] = []
    for a, b in _code_regions(text):
        for m in _KEYWORD_RE.finditer(text, a, b):
            events.append((m.start(), m.end(), m.group(1)))
    return events


def _module_name_after(text: str, pos: int) -> str:
    """First identifier following a module keyword (skipping whitespace)."""
    m = _IDENT_RE.search(text, pos)
    if not m:
        raise RtlScanError("module keyword with no module name")
    name = m.group(0)
    return name[1:] if name.startswith("\\") else name


def split_modules(text: str, file_path: str = "<text>") -> list[RtlModuleSource]:
    """Split RTL text into per-module units, preamble attached to each.

    Each unit's source_text is the shared preamble (text before the first
    module, if non-blank) followed by the verbatim module span from its
    `module` keyword through its matching `endmodule`.
    """
    events = _keyword_events(text)
    spans: list[tuple[str, int, int]] = []  # (name, start, end)
    depth = 0
    open_start = 0
    open_name = ""
    for start, end, kw in events:
        if kw in ("module", "macromodule"):
            if depth == 0:
                open_start = start
                open_name = _module_name_after(text, end)
            depth += 1
        else:  # endmodule
            if depth == 0:
                raise RtlScanError(
                    f"{file_path}: 'endmodule' without a matching 'module'"
                )
            depth -= 1
            if depth == 0:
                spans.append((open_name, open_start, end))
    if depth != 0:
        raise RtlScanError(
            f"{file_path}: {depth} unterminated 'module' block(s) "
            f"(missing 'endmodule')"
        )
    if not spans:
        raise RtlScanError(f"{file_path}: no modules found")

    preamble = text[: spans[0][1]]
    prefix = ""
    if preamble.strip():
        prefix = preamble if preamble.endswith("\n") else preamble + "\n"

    units: list[RtlModuleSource] = []
    for name, a, b in spans:
        body = prefix + text[a:b]
        units.append(
            RtlModuleSource(
                module_name=name,
                source_text=body,
                file_path=file_path,
                approx_tokens=estimate_tokens(body),
            )
        )
    return units


def module_span(unit: RtlModuleSource) -> str:
    """The unit's verbatim module region (source_text minus shared prefix)."""
    for start, _end, kw in _keyword_events(unit.source_text):
        if kw in ("module", "macromodule"):
            return unit.source_text[start:]
    return unit.source_text


def scan_design(
    root: str | Path,
    design_id: str,
    extensions: tuple[str, ...] = DEFAULT_RTL_EXTENSIONS,
    top_module: str | None = None,
) -> DesignSource:
    """Collect every module under root, in (path, in-file) order."""
    root = Path(root)
    if not root.is_dir():
        raise RtlScanError(f"{root}: not a directory")
    files = sorted(
        (p for p in root.rglob("*") if p.is_file() and p.suffix in extensions),
        key=lambda p: p.relative_to(root).as_posix(),
    )
    if not files:
        raise RtlScanError(
            f"{root}: no RTL files found (extensions: {', '.join(extensions)})"
        )
    modules: list[RtlModuleSource] = []
    for path in files:
        try:
            text = path.read_text(encoding="utf-8", errors="replace")
        except OSError as e:
            raise RtlScanError(f"cannot read {path}: {e}") from e
        modules.extend(split_modules(text, file_path=str(path)))
    return DesignSource(
        design_id=design_id, modules=tuple(modules), top_module=top_module
    )


def chunk_text(text: str, max_tokens: int) -> list[str]:
    """Split text into chunks of at most max_tokens estimated tokens.

    Chunks break at line boundaries (Verilog statements end at ';' plus
    newline in practice). A single oversized line becomes its own chunk.
    """
    if max_tokens < 1:
        raise ValueError("max_tokens must be >= 1")
    if estimate_tokens(text) <= max_tokens:
        return [text]
    chunks: list[str] = []
    current: list[str] = []
    current_tokens = 0
    for line in text.splitlines(keepends=True):
        t = estimate_tokens(line)
        if current and current_tokens + t > max_tokens:
            chunks.append("".join(current))
            current, current_tokens = [], 0
        current.append(line)
        current_tokens += t
    if current:
        chunks.append("".join(current))
    return chunks
