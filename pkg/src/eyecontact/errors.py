"""Exception types raised across the package."""


class EyeContactError(Exception):
    """Base class for every error raised by this package."""


class ProjectionDegenerateError(EyeContactError):
    """A 3D point lies on or behind the camera plane (Z <= 0)."""


class InsufficientCorrespondencesError(EyeContactError):
    """Fewer than four visible landmarks are available for pose estimation."""


class ConvergenceError(EyeContactError):
    def __init__(self, iterations: int, residual: float, message: str = ""):
        self.iterations = iterations
        self.residual = residual
        super().__init__(
            message or f"solver did not converge after {iterations} iterations "
            f"(rms residual {residual:.6g})"
        )


class NoIntersectionError(EyeContactError):
    """Gaze ray does not reach the camera plane (gaze z >= 0)."""


class DegenerateGeometryError(EyeContactError):
    pass


class RollUndefinedError(EyeContactError):
    """Head x-axis is parallel to the camera-to-face ray."""


class InvalidIntrinsicsError(EyeContactError):
    pass


class MissingInputError(EyeContactError):
    pass


class NoClusterError(EyeContactError):
    pass


class DegenerateTrainingError(EyeContactError):
    """Training labels contain a single class."""


class DimensionMismatchError(EyeContactError):
    pass


class ConfigError(EyeContactError):
    pass


class DatasetFormatError(EyeContactError):
    def __init__(self, reason: str, line: int | None = None, column: int | None = None):
        self.reason = reason
        self.line = line
        self.column = column
        where = ""
        if line is not None:
            where = f"line {line}"
            if column is not None:
                where += f", column {column}"
            where += ": "
        super().__init__(where + reason)


class EmptyDatasetError(DatasetFormatError):
    pass
