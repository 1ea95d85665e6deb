"""
Maintained view MCP tools.

A view is an engine for one query, held in a process-local registry under
a name. Facts are added and removed through update lines in the stream
grammar; counts, answers and enumerations read the maintained result.
"""

import json
import logging
from typing import Any, Dict, Optional

from ..engine import CoreNotQHierarchical, Engine
from ..query_model import ArityError, ParseError
from ..query_parser import parse_database, parse_query
from ..workload import Probe, ProbeKind, format_probe_result, parse_stream

logger = logging.getLogger(__name__)

# Global view registry - shared by all tool calls of this process
views: Dict[str, Engine] = {}


class ViewNotFound(LookupError):
    pass


def _get_view(name: str) -> Engine:
    engine = views.get(name)
    if engine is None:
        raise ViewNotFound(name)
    return engine


def _format_error_response(error: Exception, operation: str) -> str:
    """Format error response with detailed information."""
    if isinstance(error, ViewNotFound):
        return f"No view named {error}. Create it with create_view first."
    if isinstance(error, CoreNotQHierarchical):
        return (
            f"Query cannot be maintained: {error}. "
            "Only queries whose homomorphic core is q-hierarchical are supported."
        )
    if isinstance(error, (ParseError, ArityError)):
        return f"Invalid input: {error}"
    return f"Error in {operation}: {str(error)}"


def register_tools(mcp: Any) -> None:
    """Register view tools with the MCP server."""

    @mcp.tool()
    def create_view(name: str, query: str, snapshot: Optional[str] = None) -> str:
        """
        Create a maintained view for a conjunctive query.

        Args:
            name: Name under which the view is registered (replaces an existing one)
            query: Query in rule syntax, e.g. "Q(x,y) :- E(x,y), T(y)."
            snapshot: Optional initial facts, one "R c1 ... cr" per line
        """
        try:
            engine = Engine.create(parse_query(query))
            if snapshot:
                engine.load(parse_database(snapshot))
            views[name] = engine
            logger.info("view %s created for %s", name, engine.core)
            return f"View {name} maintains {engine.core} with {len(engine.facts)} fact(s); count {engine.count()}"
        except Exception as error:
            return _format_error_response(error, "create_view")

    @mcp.tool()
    def apply_updates(name: str, updates: str) -> str:
        """
        Apply inserts and deletes to a view.

        Args:
            name: View name
            updates: Update lines, "+ R c1 ... cr" to insert and "- R c1 ... cr" to delete
        """
        try:
            engine = _get_view(name)
            applied = ignored = 0
            for command in parse_stream(updates):
                if isinstance(command, Probe):
                    continue
                if engine.apply(command).applied:
                    applied += 1
                else:
                    ignored += 1
            return json.dumps({"applied": applied, "ignored": ignored, "version": engine.version})
        except Exception as error:
            return _format_error_response(error, "apply_updates")

    @mcp.tool()
    def count_results(name: str) -> str:
        """
        Number of result tuples of a view.

        Args:
            name: View name
        """
        try:
            return str(_get_view(name).count())
        except Exception as error:
            return _format_error_response(error, "count_results")

    @mcp.tool()
    def answer_query(name: str) -> str:
        """
        Whether the result of a view is nonempty ("yes" or "no").

        Args:
            name: View name
        """
        try:
            return format_probe_result(ProbeKind.ANSWER, _get_view(name).answer())
        except Exception as error:
            return _format_error_response(error, "answer_query")

    @mcp.tool()
    def enumerate_results(name: str, limit: int = 100) -> str:
        """
        List result tuples of a view, one per line, ending with "#".

        The first ``limit`` tuples are read in cursor order and then printed
        sorted; when the result is larger than ``limit`` they are an
        arbitrary subset of it, not its smallest tuples.

        Args:
            name: View name
            limit: Maximum number of tuples to read from the cursor (default 100)
        """
        try:
            engine = _get_view(name)
            tuples = []
            for values in engine.enumerate():
                if len(tuples) >= limit:
                    break
                tuples.append(values)
            return format_probe_result(ProbeKind.ENUM, tuples)
        except Exception as error:
            return _format_error_response(error, "enumerate_results")

    @mcp.tool()
    def drop_view(name: str) -> str:
        """
        Remove a view from the registry.

        Args:
            name: View name
        """
        try:
            _get_view(name)
            del views[name]
            return f"View {name} dropped"
        except Exception as error:
            return _format_error_response(error, "drop_view")

    @mcp.tool()
    def list_views() -> str:
        """List registered views with their queries and result counts."""
        if not views:
            return "No views"
        lines = [f"{name}: {engine.original_query} count={engine.count()}" for name, engine in sorted(views.items())]
        return "\n".join(lines)
