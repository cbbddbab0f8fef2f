"""Shared exception base for the simulator."""


class SimError(Exception):
    """Base class for all simulator-specific errors."""
