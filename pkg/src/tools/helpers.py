"""
Helper MCP tools: liveness, version and configuration status.

This module provides basic utilities like ping, version info,
and configuration validation tools.
"""

from typing import Any, Dict

from .. import __version__
from ..config import validate_settings


def register_tools(mcp: Any) -> None:
    """Register helper tools with the MCP server."""

    @mcp.tool()
    def ping() -> str:
        """A simple tool to check if the server is responding."""
        return "pong"

    @mcp.tool()
    def version() -> str:
        """Get version information for the dynamic CQ engine server."""
        return f"Dynamic CQ Engine version {__version__}"

    @mcp.tool()
    def validate_config() -> Dict[str, Any]:
        """Validate the DYNCQ_* environment settings and return their status."""
        return validate_settings()
