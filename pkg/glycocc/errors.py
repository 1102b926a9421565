"""
Error hierarchy shared by the library, the CLI and the HTTP service.
"""
from typing import Optional


class GlycoccError(Exception):
    """Base class for every error raised by glycocc."""

    exit_code = 1


class UserError(GlycoccError):
    """Bad input or configuration; the user can fix it."""

    exit_code = 1


class InvariantViolation(GlycoccError):
    """Something that should be impossible happened."""

    exit_code = 2


class OffsetError(UserError):
    """Error located at a character offset of the input text."""

    def __init__(self, message: str, text: str = "", offset: int = 0):
        self.text = text
        self.offset = offset
        super().__init__(f"{message} at offset {offset}")


class GlycanSyntaxError(OffsetError):
    pass


class UnknownMonosaccharide(OffsetError):
    def __init__(self, name: str, text: str = "", offset: int = 0):
        self.name = name
        super().__init__(f"Unknown monosaccharide '{name}'", text, offset)


class SmilesSyntaxError(OffsetError):
    pass


class UnsupportedElement(UserError):
    pass


class MissingTemplate(UserError):
    pass


class EmptyGlycan(MissingTemplate):
    pass


class OccupiedPosition(UserError):
    pass


class InvalidPosition(UserError):
    pass


class MissingAttribution(UserError):
    pass


class RankMismatch(UserError):
    pass


class ShapeMismatch(UserError):
    pass


class InvalidProbability(UserError):
    pass


class DegenerateBatch(UserError):
    pass


class ConfigError(UserError):
    def __init__(self, message: str, field: Optional[str] = None):
        self.field = field
        super().__init__(f"{field}: {message}" if field else message)


class DimensionMismatch(UserError):
    pass


class EmptyComplex(UserError):
    pass


class FormatError(UserError):
    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        where = f"{path or '<input>'}:{line}" if line is not None else (path or "<input>")
        super().__init__(f"{where}: {message}")


class EmptyDataset(UserError):
    pass


class BadFractions(UserError):
    pass


class DegenerateVariance(UserError):
    pass


class TooFewModels(UserError):
    pass


class MissingTheta(UserError):
    pass


class CheckpointError(UserError):
    pass


class RankViolation(InvariantViolation):
    pass


class TemplateError(InvariantViolation):
    pass


class NonFiniteState(InvariantViolation):
    def __init__(self, layer: int, rank: Optional[int] = None):
        self.layer = layer
        self.rank = rank
        detail = f" (rank {rank})" if rank is not None else ""
        super().__init__(f"Non-finite cell state after layer {layer}{detail}")


class NonFiniteLoss(InvariantViolation):
    def __init__(self, epoch: int, step: int):
        self.epoch = epoch
        self.step = step
        super().__init__(f"Non-finite loss at epoch {epoch}, step {step}")
