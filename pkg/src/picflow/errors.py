"""Exception hierarchy.

Every error raised by the package derives from :class:`PicflowError`, so
callers can catch the whole family at once.
"""


class PicflowError(Exception):
    """Base class for all package errors."""


class SymmetryViolation(PicflowError):
    def __init__(self, identity, residual):
        self.identity = identity
        self.residual = float(residual)
        super().__init__(f"{identity} violated (max residual {self.residual:.3e})")


class DimensionOutOfRange(PicflowError):
    pass


class DimensionMismatch(PicflowError):
    pass


class DimensionNot4(PicflowError):
    pass


class SingularTransform(PicflowError):
    def __init__(self, a, b):
        self.a, self.b = a, b
        super().__init__(f"l_(a,b) transform is singular for a={a!r}, b={b!r}")


class FrameNotOrthonormal(PicflowError):
    pass


class NonpositiveScalar(PicflowError):
    pass


class NotStrictlyPIC(PicflowError):
    pass


class NotKahler(PicflowError):
    def __init__(self, residual, threshold):
        self.residual = float(residual)
        super().__init__(f"tensor is not Kahler: residual {residual:.3e} > {threshold:.3e}")


class NoBracket(PicflowError):
    pass


class DegenerateDirection(PicflowError):
    pass


class StepSizeUnderflow(PicflowError):
    def __init__(self, t, h):
        self.t, self.h = t, h
        super().__init__(f"step size underflow at t={t:.6g} (h={h:.3e})")


class ShootingDivergence(PicflowError):
    pass


class BoundaryNode(PicflowError):
    pass


class BallExceedsGrid(PicflowError):
    pass


class NonpositiveTau(PicflowError):
    pass


class ConfigError(PicflowError):
    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")
