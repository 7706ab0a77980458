"""Exception and warning types raised across the package."""


class KahmError(Exception):
    """Base class for all package errors."""


class DegenerateData(KahmError):
    """Samples have no usable spread along any principal direction."""


class NumericalFailure(KahmError):
    """A dense linear-algebra routine failed to converge."""


class NoConvergence(KahmError):
    """The regularization fixed-point iteration hit its cap."""


class ZeroData(KahmError):
    """All samples are the zero vector."""


class EmptyClass(KahmError):
    def __init__(self, c: int):
        super().__init__(f"class {c} has no training samples")
        self.c = c


class AllClassesEmpty(KahmError):
    pass


class ClientHasNoCells(KahmError):
    def __init__(self, q: int):
        super().__init__(f"client {q} owns no class cells")
        self.q = q


class Unsupported(KahmError):
    pass


class DomainError(KahmError, ValueError):
    pass


class InfeasibleSpec(KahmError):
    pass


class RangeError(KahmError, ValueError):
    pass


class FormatError(KahmError):
    """Malformed input or archive file."""


class SmootherUnderflowWarning(RuntimeWarning):
    """The smoother denominator vanished and the nearest-sample fallback was used."""
