"""Exception types raised across the package."""


class NisqSpecError(Exception):
    """Base class; the CLI maps these to exit status 1."""


class ShapeMismatch(NisqSpecError, ValueError):
    pass


class RankDeficient(NisqSpecError, ValueError):
    """QR input (numerically) lacks full column rank. Re-sampling usually fixes it."""


class NoConvergence(NisqSpecError, RuntimeError):
    pass


class NotUnitary(NisqSpecError, ValueError):
    pass


class NotTracePreserving(NisqSpecError, ValueError):
    pass


class NotCP(NisqSpecError, ValueError):
    pass


class ZeroMatrix(NisqSpecError, ValueError):
    pass


class ZeroColumn(NisqSpecError, ValueError):
    pass


class SingularD(NisqSpecError, ValueError):
    pass


class TooMany(NisqSpecError, ValueError):
    pass


class InvalidProbabilities(NisqSpecError, ValueError):
    pass


class BadDataset(NisqSpecError, ValueError):
    pass


class DegenerateSpectrum(NisqSpecError, ValueError):
    pass


class SizeMismatch(NisqSpecError, ValueError):
    pass


class ConfigError(NisqSpecError, ValueError):
    pass
