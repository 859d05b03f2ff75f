"""
Exception hierarchy for GeoWeight
Input problems map to CLI exit code 2, numerical failures to exit code 3
"""

from typing import Iterable, List, Optional


class GWError(Exception):
    """Base class for all GeoWeight errors"""
    pass


class InputError(GWError):
    """Invalid data, parameters or files"""
    pass


class ConfigurationError(InputError):
    """Invalid run configuration"""
    pass


class NumericalError(GWError):
    """A numerical computation could not be completed"""
    pass


class DegenerateWindowError(NumericalError):
    """All geographic weights of a calibration window are zero"""

    def __init__(self, index: Optional[int], message: Optional[str] = None):
        self.index = index
        if message is None:
            message = f"Degenerate window at calibration point {index}: sum of weights is zero"
        super().__init__(message)


class UndefinedCorrelationError(NumericalError):
    """Local standard deviation is zero so the correlation is undefined"""

    def __init__(self, index: Optional[int], message: Optional[str] = None):
        self.index = index
        if message is None:
            message = f"Correlation undefined at calibration point {index}: zero local standard deviation"
        super().__init__(message)


class SingularMatrixError(NumericalError):
    """Local cross-product matrix is singular at one or more locations"""

    def __init__(self, indices: Iterable[int], message: Optional[str] = None):
        self.indices: List[int] = list(indices)
        if message is None:
            shown = ", ".join(str(i) for i in self.indices[:10])
            more = "" if len(self.indices) <= 10 else f" (+{len(self.indices) - 10} more)"
            message = (
                f"Singular local matrix at location(s) {shown}{more}; "
                f"try a larger bandwidth"
            )
        super().__init__(message)


class AiccUndefinedError(NumericalError):
    """AICc denominator n - 2 - tr(S) is not positive"""
    pass


class NoValidBandwidthError(NumericalError):
    """The bandwidth objective is infinite over the whole search range"""
    pass


class ConvergenceError(NumericalError):
    """An iterative procedure failed in a way that leaves no usable result"""
    pass


class DegenerateBandwidthError(InputError):
    """Kernel radius is zero, so the weights cannot be evaluated"""

    def __init__(self, index: Optional[int], message: Optional[str] = None):
        self.index = index
        if message is None:
            message = f"Degenerate bandwidth at calibration point {index}: zero kernel radius"
        super().__init__(message)
