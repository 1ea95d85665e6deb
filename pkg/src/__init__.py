"""
Dynamic CQ Engine - maintained conjunctive query results under updates.

Classifies conjunctive queries by their q-hierarchical structure and
maintains the results of tractable ones with constant-time updates,
counting and Boolean answers, and constant-delay enumeration.
"""

__version__ = "0.1.0"
__author__ = "Applied Relevance"


def main() -> None:
    """Main entry point for the command-line interface."""
    from .main import main as run

    run()
