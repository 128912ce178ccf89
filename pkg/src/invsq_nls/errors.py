"""Exception hierarchy shared by the numerical modules and the CLI."""


class InvSqError(Exception):
    """Base class for all package errors."""


class ConfigurationError(InvSqError):
    """Invalid parameters or failed setup (maps to CLI exit code 2)."""


class UsageError(InvSqError):
    """An operation was called with incompatible arguments (e.g. grid mismatch)."""


class NumericError(InvSqError):
    """A numerical procedure failed (maps to CLI exit code 3)."""


class SolverFailure(NumericError):
    """The ground-state shooting solver could not bracket or converge."""
