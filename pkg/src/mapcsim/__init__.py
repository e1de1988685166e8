"""Step-synchronous simulation server for the Agents Assemble grid scenario."""

__version__ = "0.1.0"
