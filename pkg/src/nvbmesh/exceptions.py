"""Exception types shared across the package."""


class NvbMeshError(Exception):
    """Base class for all package errors."""


class MeshError(NvbMeshError):
    """Invalid mesh topology, geometry, or refusal to mutate (e.g. bisecting a non-leaf)."""


class MeshFormatError(NvbMeshError):
    """Malformed mesh file. Carries the offending 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class GradingError(NvbMeshError):
    """Invalid grading parameters or a violated algorithm precondition."""


class KelloggError(NvbMeshError):
    """Newton iteration for the interface-solution parameters failed."""

    def __init__(self, message: str, trace: list | None = None):
        self.trace = trace or []
        super().__init__(message)


class SingularityError(NvbMeshError):
    """Point evaluation requested where the function is singular (gradient at a center)."""


class AnalysisError(NvbMeshError):
    """Error-quadrature precondition failed (e.g. singular point is not a mesh vertex)."""


class ConfigError(NvbMeshError):
    """Experiment configuration is inconsistent with the module preconditions."""
