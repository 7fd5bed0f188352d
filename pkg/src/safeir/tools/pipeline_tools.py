"""Pipeline MCP tools.

Tools for parsing, printing, instrumenting, running and measuring `.sir`
modules. Every tool takes the module either as `source` text or as the name
of a shipped `fixture`.
"""

import json
from typing import Any

from mcp.types import TextContent, Tool

from ..constants import DEFAULT_GRANULE, INSTRUMENT_MODES, MODE_NONE, MODE_SAFEFFI, RUN_MODES
from ..exceptions import SafeIRError
from ..fixtures import FIXTURE_NAMES, fixture_text
from ..harness.stats import collect_stats
from ..ir.module import ProgramModule
from ..ir.validate import validate_module
from ..parsers import parse_module, print_module
from ..passes import instrument
from ..runtime import RuntimeConfig, execute

_MODULE_PROPERTIES = {
    "source": {
        "type": "string",
        "description": "Module text in the .sir format",
    },
    "fixture": {
        "type": "string",
        "enum": list(FIXTURE_NAMES),
        "description": "Name of a shipped fixture, used when 'source' is omitted",
    },
}


# ============================================================================
# Tool Definitions
# ============================================================================

def get_pipeline_tools() -> list[Tool]:
    """Return list of pipeline tool definitions."""
    return [
        Tool(
            name="parse_module",
            description=(
                "Parse and validate a .sir module. Reports functions, instruction "
                "counts and any validation diagnostics."
            ),
            inputSchema={
                "type": "object",
                "properties": dict(_MODULE_PROPERTIES),
            },
        ),
        Tool(
            name="print_module",
            description="Parse a .sir module and print it back in normalized form.",
            inputSchema={
                "type": "object",
                "properties": dict(_MODULE_PROPERTIES),
            },
        ),
        Tool(
            name="instrument_module",
            description=(
                "Instrument a module and return the instrumented text plus check "
                "statistics.\n\n"
                "Modes:\n"
                "- baseline: a DEREF check before every load and store\n"
                "- safeffi: checks on safe pointers elided, boundary checks added\n"
                "- safeffi-heap: safeffi plus heap checks after possibly-freeing calls"
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    **_MODULE_PROPERTIES,
                    "mode": {
                        "type": "string",
                        "enum": list(INSTRUMENT_MODES),
                        "description": "Instrumentation mode (default safeffi)",
                    },
                },
            },
        ),
        Tool(
            name="run_module",
            description=(
                "Instrument a module (unless mode is 'none') and execute it on the "
                "tagged-memory interpreter. Returns the verdict, exit code, check "
                "counters and the violation report, if any."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    **_MODULE_PROPERTIES,
                    "mode": {
                        "type": "string",
                        "enum": list(RUN_MODES),
                        "description": "Instrumentation mode (default safeffi)",
                    },
                    "entry": {
                        "type": "string",
                        "description": "Entry function (default main)",
                    },
                    "granule": {
                        "type": "integer",
                        "description": f"Tag granule in bytes (default {DEFAULT_GRANULE})",
                        "minimum": 1,
                    },
                },
            },
        ),
        Tool(
            name="module_stats",
            description=(
                "Static check accounting for every instrumentation mode and, when "
                "'entry' is given, dynamic check counts and ratios to baseline."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    **_MODULE_PROPERTIES,
                    "entry": {
                        "type": "string",
                        "description": "Entry function; omit for static numbers only",
                    },
                    "granule": {
                        "type": "integer",
                        "description": f"Tag granule in bytes (default {DEFAULT_GRANULE})",
                        "minimum": 1,
                    },
                },
            },
        ),
    ]


# ============================================================================
# Tool Handlers
# ============================================================================

def _error(message: str) -> list[TextContent]:
    return [TextContent(type="text", text=f"Error: {message}")]


def _json(data: Any) -> list[TextContent]:
    return [TextContent(type="text", text=json.dumps(data, indent=2))]


def _source(arguments: dict) -> tuple[str, str]:
    """(text, filename) of the module named by the arguments."""
    source = arguments.get("source")
    if source:
        return source, "<source>"
    fixture = arguments.get("fixture")
    if fixture:
        return fixture_text(fixture), f"{fixture}.sir"
    raise ValueError("either 'source' or 'fixture' is required")


def _load(arguments: dict, validate: bool = True) -> ProgramModule:
    text, filename = _source(arguments)
    return parse_module(text, filename=filename, validate=validate)


def _config(arguments: dict) -> RuntimeConfig:
    return RuntimeConfig(granule=int(arguments.get("granule") or DEFAULT_GRANULE))


async def handle_parse_module(arguments: dict) -> list[TextContent]:
    m = _load(arguments, validate=False)
    diagnostics = validate_module(m)
    lines = [f"# Module {m.name}", ""]
    if m.instrumented:
        lines.append(f"**Instrumented:** {m.instrumented}")
    lines.append(f"**Instructions:** {m.instruction_count()}")
    lines.append("")
    lines.append("## Functions")
    for fn in m.functions:
        if fn.is_declaration:
            body = "declaration"
        else:
            body = f"{len(fn.blocks)} blocks, {sum(1 for _ in fn.instructions())} instructions"
        attrs = ", ".join(sorted(a.value for a in fn.attributes))
        lines.append(f"- **{fn.name}**: {body}" + (f" [{attrs}]" if attrs else ""))
    lines.append("")
    if diagnostics:
        lines.append(f"## Diagnostics ({len(diagnostics)})")
        lines.extend(f"- {d}" for d in diagnostics)
    else:
        lines.append("Module is valid.")
    return [TextContent(type="text", text="\n".join(lines))]


async def handle_print_module(arguments: dict) -> list[TextContent]:
    return [TextContent(type="text", text=print_module(_load(arguments)))]


async def handle_instrument_module(arguments: dict) -> list[TextContent]:
    mode = arguments.get("mode") or MODE_SAFEFFI
    out, stats = instrument(_load(arguments), mode)
    text = print_module(out)
    return [
        TextContent(type="text", text=text),
        TextContent(type="text", text=json.dumps(stats.summary(), indent=2)),
    ]


async def handle_run_module(arguments: dict) -> list[TextContent]:
    mode = arguments.get("mode") or MODE_SAFEFFI
    if mode not in RUN_MODES:
        return _error(f"unknown mode '{mode}' (expected one of {', '.join(RUN_MODES)})")
    m = _load(arguments)
    if mode != MODE_NONE:
        m, _ = instrument(m, mode)
    outcome = execute(m, arguments.get("entry") or "main", _config(arguments))
    return _json({"mode": mode, **outcome.to_dict()})


async def handle_module_stats(arguments: dict) -> list[TextContent]:
    report = collect_stats(
        _load(arguments),
        entry=arguments.get("entry") or None,
        config=_config(arguments),
    )
    return _json(report)


PIPELINE_TOOL_NAMES = {
    "parse_module",
    "print_module",
    "instrument_module",
    "run_module",
    "module_stats",
}

_HANDLERS = {
    "parse_module": handle_parse_module,
    "print_module": handle_print_module,
    "instrument_module": handle_instrument_module,
    "run_module": handle_run_module,
    "module_stats": handle_module_stats,
}


async def handle_pipeline_tool(name: str, arguments: dict) -> list[TextContent]:
    """Route pipeline tool calls to the appropriate handler."""
    handler = _HANDLERS.get(name)
    if handler is None:
        return [TextContent(type="text", text=f"Unknown pipeline tool: {name}")]
    try:
        return await handler(arguments or {})
    except (SafeIRError, KeyError, ValueError) as e:
        return _error(str(e))
