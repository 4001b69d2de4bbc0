"""mcp-audit: static audit of MCP server repositories for risky API usage."""

__version__ = "0.1.0"
