"""Shared exception types."""


class FlowtuneError(Exception):
    """Base class for all errors raised by this package."""


class TransportError(FlowtuneError):
    """A remote provider could not be reached or returned garbage."""
