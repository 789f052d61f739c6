"""Exception taxonomy shared by all lambkit modules.

Every error raised on a documented failure path derives from LambkitError so
callers (and the CLI) can map failures to exit codes without string matching.
"""

__all__ = [
    "LambkitError",
    "InputError",
    "ConfigError",
    "FitPeakError",
    "FitConvergenceError",
    "DegenerateFixtureError",
    "DispersionRangeError",
    "SolverError",
    "SensitivityError",
    "DesignError",
    "DoseRangeError",
    "LayerAssignmentError",
    "PackingError",
    "CoordinateError",
    "GdsParseError",
    "TouchstoneParseError",
    "CalibrationError",
    "CorrectionError",
    "StatisticsError",
    "FlowError",
    "MissingRateError",
]


class LambkitError(Exception):
    """Base class for all toolkit errors."""


class InputError(LambkitError, ValueError):
    """A caller-supplied value violates a documented precondition."""


class ConfigError(LambkitError, ValueError):
    """Configuration file failed schema validation or refers to missing files."""


class FitPeakError(LambkitError):
    """Fewer admittance peaks found than requested motional branches."""

    def __init__(self, found: int, requested: int):
        self.found = found
        self.requested = requested
        super().__init__(
            f"found {found} admittance peak(s) but {requested} branch(es) requested"
        )


class FitConvergenceError(LambkitError):
    """Optimizer hit the iteration cap; carries the best model seen so far."""

    def __init__(self, message: str, model=None, report=None):
        self.model = model
        self.report = report
        super().__init__(message)


class DegenerateFixtureError(LambkitError, ValueError):
    """Open/short de-embedding fixtures are indistinguishable from the DUT."""


class SolverError(LambkitError):
    """Dispersion root finding failed (no bracketed root in the scan window)."""


class DispersionRangeError(LambkitError, ValueError):
    """Requested wavenumber lies outside the solved curve or inside a gap."""


class SensitivityError(LambkitError):
    """Finite-difference sensitivity evaluation failed to solve a perturbed case."""


class DesignError(LambkitError, ValueError):
    """Resonator design constraint cannot be met (e.g. finger-count cap)."""


class DoseRangeError(DesignError):
    """Finger width outside the characterized exposure-dose range."""


class LayerAssignmentError(DesignError):
    """Pitch falls outside both exposure layer bands."""


class PackingError(LambkitError):
    """Chip or wafer packing overflow; names the first non-fitting item."""


class CoordinateError(LambkitError, ValueError):
    """Geometry exceeds the 32-bit database-unit coordinate range."""


class GdsParseError(LambkitError, ValueError):
    """Malformed GDSII stream; carries the byte offset of the failure."""

    def __init__(self, message: str, offset: int | None = None):
        self.offset = offset
        if offset is not None:
            message = f"{message} (byte offset {offset})"
        super().__init__(message)


class TouchstoneParseError(LambkitError, ValueError):
    """Malformed Touchstone file; carries the 1-based line number."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class CalibrationError(LambkitError):
    """One-port error-box solve failed (degenerate standards)."""


class CorrectionError(LambkitError):
    """Error-box correction is singular at some frequency."""


class StatisticsError(LambkitError, ValueError):
    """Statistical reduction over wafer sites is ill-posed."""


class FlowError(LambkitError, ValueError):
    """Process flow is structurally invalid (not rule violations, which are data)."""


class MissingRateError(FlowError):
    """No etch/ash rate entry for a (material, chemistry) pair."""
