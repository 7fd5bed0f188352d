"""MCP server for safeir.

Exposes the pipeline (parse, print, instrument, run, stats), the nofree
annotation database and the evaluation history as MCP tools over stdio.
Logging goes to stderr; stdout carries the protocol.
"""

import asyncio
import logging
from typing import Any, Awaitable, Callable

from mcp.server import Server
from mcp.server.stdio import stdio_server
from mcp.types import TextContent, Tool

from .tools.annotation_tools import (
    ANNOTATION_TOOL_NAMES,
    get_annotation_tools,
    handle_annotation_tool,
)
from .tools.pipeline_tools import (
    PIPELINE_TOOL_NAMES,
    get_pipeline_tools,
    handle_pipeline_tool,
)

logger = logging.getLogger(__name__)

app = Server("safeir")

_Router = Callable[[str, dict], Awaitable[list[TextContent]]]

_ROUTES: list[tuple[set[str], _Router]] = [
    (PIPELINE_TOOL_NAMES, handle_pipeline_tool),
    (ANNOTATION_TOOL_NAMES, handle_annotation_tool),
]


@app.list_tools()
async def list_tools() -> list[Tool]:
    return get_pipeline_tools() + get_annotation_tools()


@app.call_tool()
async def call_tool(name: str, arguments: Any) -> list[TextContent]:
    """Dispatch a tool call to the module that defines the tool."""
    logger.info("tool call: %s", name)
    for names, route in _ROUTES:
        if name in names:
            return await route(name, arguments)
    return [TextContent(type="text", text=f"Unknown tool: {name}")]


async def main():
    """Serve over stdio until the client disconnects."""
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    async with stdio_server() as (read_stream, write_stream):
        await app.run(read_stream, write_stream, app.create_initialization_options())


def run():
    """Console-script target for ``safeir-mcp``.

    Script wrappers call their target without awaiting it, so this must stay
    a plain function.
    """
    asyncio.run(main())


if __name__ == "__main__":
    run()
