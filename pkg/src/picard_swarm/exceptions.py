"""Exception hierarchy for picard_swarm."""


class PicardError(Exception):
    """Base class for every error raised by this package."""


class InvalidSpanError(PicardError, ValueError):
    pass


class InvalidSizeError(PicardError, ValueError):
    pass


class ShapeError(PicardError, ValueError):
    pass


class DivergenceError(PicardError, FloatingPointError):
    """Non-finite value appeared in a Picard iterate."""

    def __init__(self, message, node=None, column=None):
        super().__init__(message)
        self.node = node
        self.column = column


class SingularityError(PicardError, ZeroDivisionError):
    def __init__(self, message, node=None, trajectory=None):
        super().__init__(message)
        self.node = node
        self.trajectory = trajectory


class CloseApproachError(SingularityError):
    def __init__(self, message, body=None, node=None, trajectory=None):
        super().__init__(message, node=node, trajectory=trajectory)
        self.body = body


class NonEllipticError(PicardError, ValueError):
    pass


class KeplerSolverError(PicardError, ArithmeticError):
    pass


class CoverageError(PicardError, ValueError):
    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class AlignmentError(PicardError, ValueError):
    pass


class InvalidPlanError(PicardError, ValueError):
    pass


class EmptyReductionError(PicardError, ValueError):
    pass


class GroupSolveError(PicardError):
    """A group solve failed; wraps the original error with the group index."""

    def __init__(self, message, group=None):
        super().__init__(message)
        self.group = group


class PartialResultError(PicardError):
    """Raised when some group did not converge.

    ``completed`` holds the segments finished before the failure and
    ``failed_groups`` the indices of the non-convergent groups.
    """

    def __init__(self, message, completed=None, failed_groups=None, result=None):
        super().__init__(message)
        self.completed = completed if completed is not None else []
        self.failed_groups = list(failed_groups or [])
        self.result = result


class OracleFailureError(PicardError, RuntimeError):
    pass


class RunTimeoutError(PicardError, TimeoutError):
    pass


class InputError(PicardError, ValueError):
    """Malformed input file or configuration; ``row`` is 1-based when known."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
