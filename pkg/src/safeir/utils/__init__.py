"""Helpers shared by the CLI and the MCP server."""

from .db_helpers import AnnotationStore, open_nofree_db

__all__ = ["AnnotationStore", "open_nofree_db"]
