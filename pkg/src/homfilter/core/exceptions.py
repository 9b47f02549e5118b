"""Custom exceptions for simulation, averaging and filtering"""

from typing import Any, Dict, Optional


class HomFilterError(Exception):
    """Base exception for homfilter"""

    exit_code = 1


class ConfigurationError(HomFilterError):
    """Invalid grid, parameters, config keys or model constants"""

    exit_code = 2


class StabilityError(ConfigurationError):
    """Time step too coarse for the fast scale"""

    pass


class DivergenceError(HomFilterError):
    """Non-finite state reached during time stepping"""

    def __init__(self, message: str, step: Optional[int] = None):
        super().__init__(message)
        self.step = step


class ModelError(HomFilterError):
    """Model function evaluated outside its admissible range"""

    pass


class FilterDegeneracyError(HomFilterError):
    """All particle weights underflowed"""

    pass


class UnderflowError(HomFilterError):
    """Density mass collapsed on the finite-difference grid"""

    pass


class FitError(HomFilterError):
    """Not enough usable points for a log-log fit"""

    pass


class ExperimentFailure(HomFilterError):
    """Abort or degeneracy quota exceeded during an experiment"""

    def __init__(
        self, message: str, diagnostics: Optional[Dict[str, Any]] = None
    ):
        super().__init__(message)
        self.diagnostics = diagnostics or {}
