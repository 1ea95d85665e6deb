"""
FastMCP server exposing query analysis and maintained views.

The tools are registered per module from src/tools; the server only
speaks the stdio transport.
"""

import logging
import signal
import sys
from typing import Any, Optional

from mcp.server.fastmcp import FastMCP

from .config import validate_settings
from .tools import helpers, queries, views

logger = logging.getLogger(__name__)

# Global server instance - will be initialized in create_server()
mcp: Optional[FastMCP] = None


def create_server() -> FastMCP:
    """Create and configure the MCP server instance."""
    global mcp

    mcp = FastMCP("dynamic-cq-engine")

    config_check = validate_settings()
    if not config_check["valid"]:
        logger.error("%s", config_check["message"])
        logger.error("The server will start with default settings.")

    # Register all tool modules
    helpers.register_tools(mcp)
    queries.register_tools(mcp)
    views.register_tools(mcp)

    return mcp


def start_server(server: FastMCP) -> None:
    """Start the MCP server on stdio with signal handling."""

    def signal_handler(sig: int, frame: Any) -> None:
        """Handle shutdown signals gracefully."""
        print("Shutting down dynamic CQ engine server...", file=sys.stderr)
        sys.exit(0)

    signal.signal(signal.SIGINT, signal_handler)
    signal.signal(signal.SIGTERM, signal_handler)

    try:
        print("Dynamic CQ engine server running on stdio transport", file=sys.stderr)
        server.run()
    except Exception as error:
        print(f"Fatal error: {error}", file=sys.stderr)
        sys.exit(1)
