"""
Query analysis MCP tools.

This module provides tools for classifying conjunctive queries,
computing their homomorphic cores and drawing their q-trees.
"""

from typing import Any

from ..analysis import NotQHierarchical, build_qforest, classify, homomorphic_core
from ..query_model import ParseError
from ..query_parser import parse_query


def _format_error_response(error: Exception, operation: str) -> str:
    """Format error response with detailed information."""
    if isinstance(error, ParseError):
        return f"Query syntax error: {error}"
    if isinstance(error, NotQHierarchical):
        return f"No q-tree exists: {error}"
    return f"Error in {operation}: {str(error)}"


def register_tools(mcp: Any) -> None:
    """Register query analysis tools with the MCP server."""

    @mcp.tool()
    def classify_query(query: str) -> str:
        """
        Classify a conjunctive query for dynamic evaluation.

        Reports whether the query and its core are q-hierarchical and
        whether Boolean answering, counting and enumeration under single-fact
        updates are Tractable, ConditionallyHard or Open.

        Args:
            query: Query in rule syntax, e.g. "Q(x) :- E(x,y), T(y)."
        """
        try:
            return classify(parse_query(query)).report()
        except Exception as error:
            return _format_error_response(error, "classify_query")

    @mcp.tool()
    def query_core(query: str) -> str:
        """
        Compute the homomorphic core of a conjunctive query.

        Args:
            query: Query in rule syntax
        """
        try:
            return str(homomorphic_core(parse_query(query)))
        except Exception as error:
            return _format_error_response(error, "query_core")

    @mcp.tool()
    def query_tree(query: str) -> str:
        """
        Draw the q-tree of every connected component of a q-hierarchical query.

        Free variables are marked with '*'; every node lists the atoms it
        represents.

        Args:
            query: Query in rule syntax
        """
        try:
            trees = build_qforest(parse_query(query))
            return "\n\n".join(tree.render() for tree in trees)
        except Exception as error:
            return _format_error_response(error, "query_tree")
