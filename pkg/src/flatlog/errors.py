"""Exception types shared across the engine.

The CLI maps these onto exit codes: ProgramError -> 1, InputError -> 2,
InternalError -> 3.
"""


class FlatlogError(Exception):
    pass


class ProgramError(FlatlogError):
    """Bad source program: syntax, arity, safety, stratification or split errors."""

    def __init__(self, message, line=None, col=None):
        if line is not None:
            loc = f"{line}:{col}" if col is not None else str(line)
            message = f"{loc}: {message}"
        super().__init__(message)
        self.line = line
        self.col = col


class InputError(FlatlogError):
    """Problems with fact files or other inputs (including interner capacity)."""


class InternalError(FlatlogError):
    """Engine invariant violation. Always a bug, never a user error."""
