"""Exception types shared across the package."""


class TrimerError(Exception):
    """Base class; `exit_code` is what the CLI returns for it."""

    exit_code = 1


class InvalidArgument(TrimerError, ValueError):
    exit_code = 2


class UnsupportedGrid(TrimerError, ValueError):
    exit_code = 2


class DomainError(TrimerError, ValueError):
    exit_code = 2


class IllConditioned(TrimerError, ArithmeticError):
    exit_code = 2


class ResourceError(TrimerError, MemoryError):
    exit_code = 4
