"""Exception types shared by every Micro-Net subsystem."""
from typing import Optional


class MicroNetError(Exception):
    """Base class for all Micro-Net errors."""


class DimensionError(MicroNetError, ValueError):
    """Tensor shapes disagree along a named axis."""

    def __init__(self, message: str, axis: Optional[str] = None):
        self.axis = axis
        if axis:
            message = f"{message} (axis: {axis})"
        super().__init__(message)


class ParameterError(MicroNetError, ValueError):
    """A layer or initializer hyperparameter is out of range."""


class ValidationError(MicroNetError, ValueError):
    """Input data violates a contract (labels, shapes of a dataset, ...)."""


class ConfigError(MicroNetError, ValueError):
    """A configuration file or flag cannot be resolved."""


class GraphConstructionError(MicroNetError, ValueError):
    """An architecture cannot be wired; `edge` names the offending connection."""

    def __init__(self, message: str, edge: Optional[str] = None):
        self.edge = edge
        if edge:
            message = f"{message} (edge: {edge})"
        super().__init__(message)


class _OffsetError(MicroNetError):
    def __init__(self, message: str, offset: Optional[int] = None, path: Optional[str] = None):
        self.offset = offset
        self.path = path
        where = []
        if path:
            where.append(str(path))
        if offset is not None:
            where.append(f"byte {offset}")
        if where:
            message = f"{message} [{', '.join(where)}]"
        super().__init__(message)


class IntegrityError(_OffsetError, OSError):
    """A checkpoint or tensor file is truncated or corrupt."""


class ParseError(_OffsetError, ValueError):
    """A PPM/PGM or tensor header is malformed."""


class AnalysisError(MicroNetError, ValueError):
    """Receptive-field analysis cannot run on the requested domain."""

    def __init__(self, message: str, suggested_size: Optional[int] = None):
        self.suggested_size = suggested_size
        if suggested_size is not None:
            message = f"{message}; try a domain of at least {suggested_size}"
        super().__init__(message)


class UndefinedMetricError(MicroNetError, ValueError):
    """A metric was requested on an empty confusion matrix."""


class NumericalError(MicroNetError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, message: str, epoch: Optional[int] = None, step: Optional[int] = None):
        self.epoch = epoch
        self.step = step
        super().__init__(f"{message} (epoch {epoch}, step {step})")
