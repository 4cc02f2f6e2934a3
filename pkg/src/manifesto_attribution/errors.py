"""Exception types shared across the package."""


class ManifestoError(Exception):
    """Base class for all package errors."""


class PreconditionError(ManifestoError, ValueError):
    """An input violates an operation's documented precondition."""


class StructuralError(ManifestoError, ValueError):
    """Shapes, lengths or label sets do not line up."""


class CorpusEncodingError(ManifestoError, UnicodeError):
    """A document is not valid UTF-8."""

    def __init__(self, source: str, offset: int, reason: str = "invalid utf-8"):
        self.source = source
        self.offset = offset
        super().__init__(f"{source}: {reason} at byte offset {offset}")


class TrainingDivergedError(ManifestoError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch: int, loss: float):
        self.epoch = epoch
        self.loss = loss
        super().__init__(f"training diverged at epoch {epoch} (loss={loss})")


class ArtifactFormatError(ManifestoError, ValueError):
    """A model artifact is corrupt, truncated or of an unknown version."""
