"""Exception types shared across the package."""


class GdfError(Exception):
    """Base class for all package errors."""


class InvalidInputError(GdfError):
    """Input violates a precondition (empty mesh, bad counts, missing file)."""


class MeshFormatError(InvalidInputError):
    """A mesh file could not be parsed. Carries the offending line when known."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)
        self.line = line


class TrainingDivergedError(GdfError):
    """Training produced a non-finite loss. Carries the iteration index."""

    def __init__(self, iteration: int, loss_value: float):
        super().__init__(f"non-finite loss {loss_value!r} at iteration {iteration}")
        self.iteration = iteration
        self.loss_value = loss_value


class ExtractionError(GdfError):
    """Field evaluation or mesh extraction hit non-finite values."""
