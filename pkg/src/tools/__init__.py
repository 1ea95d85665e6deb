"""
MCP tools for query analysis and maintained views.

This package contains the MCP tools organized by functionality:
- helpers: Basic utilities (ping, version, configuration check)
- queries: Classification, homomorphic cores and q-trees
- views: Maintained query results under fact updates
"""
