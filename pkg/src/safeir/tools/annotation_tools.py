"""Annotation and history MCP tools.

Compute nofree verdicts for a module, inspect the persisted database that
later compilation units read, and read back recorded parity evaluations.
"""

import json
from pathlib import Path
from typing import Any

from mcp.types import TextContent, Tool

from ..analysis.dealloc_graph import build_call_graph, compute_nofree, save_nofree_db
from ..constants import RUN_MODES, SQLITE_SUFFIXES
from ..database import get_nofree_db_path
from ..exceptions import SafeIRError
from ..fixtures import FIXTURE_NAMES, fixture_text
from ..parsers import parse_module
from ..utils.db_helpers import AnnotationStore, open_nofree_db

_DB_PATH_HELP = "Nofree database (default $SAFEIR_NOFREE_DB or ~/.safeir/nofree.tsv)"


# ============================================================================
# Tool Definitions
# ============================================================================

def get_annotation_tools() -> list[Tool]:
    """Return list of nofree annotation tool definitions."""
    return [
        Tool(
            name="nofree_compute",
            description=(
                "Run the call-graph nofree analysis on a module, threading the "
                "verdicts already stored in the nofree database. With save=true the "
                "merged result is written back (MAYFREE always wins on conflict)."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "source": {
                        "type": "string",
                        "description": "Module text in the .sir format",
                    },
                    "fixture": {
                        "type": "string",
                        "enum": list(FIXTURE_NAMES),
                        "description": "Shipped fixture, used when 'source' is omitted",
                    },
                    "db_path": {
                        "type": "string",
                        "description": _DB_PATH_HELP,
                    },
                    "save": {
                        "type": "boolean",
                        "description": "Write the merged verdicts back to the database",
                    },
                },
            },
        ),
        Tool(
            name="nofree_show",
            description=(
                "List the verdicts stored in the nofree database, or look up one "
                "function (a SQLite store also reports when it was last updated)."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "db_path": {
                        "type": "string",
                        "description": _DB_PATH_HELP,
                    },
                    "function": {
                        "type": "string",
                        "description": "Only this function",
                    },
                },
            },
        ),
        Tool(
            name="evaluation_history",
            description=(
                "Read the parity runs recorded by `safeir evaluate --history`. Without "
                "run_id, lists the most recent runs. With run_id, returns that run with "
                "its case verdicts and the regressions against the run before it. With "
                "case_id and mode, returns that case's verdicts across runs."
            ),
            inputSchema={
                "type": "object",
                "properties": {
                    "db_path": {
                        "type": "string",
                        "description": "SQLite database the runs were recorded in",
                    },
                    "run_id": {"type": "integer"},
                    "case_id": {"type": "string"},
                    "mode": {
                        "type": "string",
                        "enum": list(RUN_MODES),
                        "description": "Restrict case verdicts to one mode",
                    },
                    "limit": {
                        "type": "integer",
                        "description": "Number of runs to list (default 20)",
                    },
                },
                "required": ["db_path"],
            },
        ),
    ]


# ============================================================================
# Tool Handlers
# ============================================================================

def _format_entries(title: str, items: list[tuple[str, Any]]) -> str:
    lines = [f"# {title}", ""]
    if not items:
        lines.append("No entries.")
    for name, entry in items:
        unit = f" ({entry.unit})" if entry.unit else ""
        lines.append(f"- **{name}**: {entry.verdict.value}{unit}")
    return "\n".join(lines)


async def handle_nofree_compute(arguments: dict) -> list[TextContent]:
    source = arguments.get("source")
    fixture = arguments.get("fixture")
    if source:
        m = parse_module(source, filename="<source>")
    elif fixture:
        m = parse_module(fixture_text(fixture), filename=f"{fixture}.sir")
    else:
        return [TextContent(type="text", text="Error: either 'source' or 'fixture' is required")]

    path = get_nofree_db_path(arguments.get("db_path"))
    db = compute_nofree(build_call_graph(m), open_nofree_db(path))
    text = _format_entries(f"Nofree verdicts after {m.name}", db.items())
    if arguments.get("save"):
        save_nofree_db(db, path)
        text += f"\n\nSaved {len(db)} entries to {path}"
    return [TextContent(type="text", text=text)]


async def handle_nofree_show(arguments: dict) -> list[TextContent]:
    path = get_nofree_db_path(arguments.get("db_path"))
    name = arguments.get("function")
    if name and path.suffix in SQLITE_SUFFIXES:
        row = AnnotationStore(path).get_annotation(name)
        if row is None:
            return [TextContent(type="text", text=f"No verdict for {name} in {path}")]
        text = (f"- **{row.function_name}**: {row.verdict} ({row.unit or '-'}), "
                f"updated {row.updated_at:%Y-%m-%d %H:%M}")
        return [TextContent(type="text", text=text)]

    db = open_nofree_db(path)
    items = db.items()
    if name:
        items = [(n, entry) for n, entry in items if n == name]
    return [TextContent(type="text", text=_format_entries(f"Nofree database {path}", items))]


def _format_runs(runs: list) -> str:
    lines = ["# Evaluation runs", ""]
    if not runs:
        lines.append("No runs recorded.")
    for run in runs:
        status = "PASS" if run.passed else "FAIL"
        lines.append(
            f"- **#{run.id}** {run.started_at:%Y-%m-%d %H:%M} {status}: "
            f"{run.case_count} cases, modes {', '.join(run.mode_list)} ({run.corpus})"
        )
    return "\n".join(lines)


async def handle_evaluation_history(arguments: dict) -> list[TextContent]:
    db_path = arguments.get("db_path")
    if not db_path:
        return [TextContent(type="text", text="Error: 'db_path' is required")]
    path = Path(db_path).expanduser()
    if not path.exists():
        return [TextContent(type="text", text=f"Error: no evaluation history at {path}")]
    store = AnnotationStore(path)
    mode = arguments.get("mode")

    case_id = arguments.get("case_id")
    if case_id:
        if not mode:
            return [TextContent(type="text", text="Error: 'mode' is required with 'case_id'")]
        verdicts = store.case_history(case_id, mode)
        lines = [f"# {case_id} ({mode})", ""]
        lines += [f"{i}. {verdict}" for i, verdict in enumerate(verdicts, 1)] or ["No verdicts."]
        return [TextContent(type="text", text="\n".join(lines))]

    run_id = arguments.get("run_id")
    if run_id is not None:
        data = store.describe_run(int(run_id), mode)
        if data is None:
            return [TextContent(type="text", text=f"Error: no evaluation run {run_id}")]
        return [TextContent(type="text", text=json.dumps(data, indent=2))]

    runs = store.list_runs(int(arguments.get("limit", 20)))
    return [TextContent(type="text", text=_format_runs(runs))]


ANNOTATION_TOOL_NAMES = {
    "nofree_compute",
    "nofree_show",
    "evaluation_history",
}


async def handle_annotation_tool(name: str, arguments: dict) -> list[TextContent]:
    """Route annotation tool calls to the appropriate handler."""
    arguments = arguments or {}
    try:
        if name == "nofree_compute":
            return await handle_nofree_compute(arguments)
        elif name == "nofree_show":
            return await handle_nofree_show(arguments)
        elif name == "evaluation_history":
            return await handle_evaluation_history(arguments)
        else:
            return [TextContent(type="text", text=f"Unknown annotation tool: {name}")]
    except (SafeIRError, KeyError, ValueError) as e:
        return [TextContent(type="text", text=f"Error: {e}")]
