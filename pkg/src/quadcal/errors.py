"""Exception hierarchy for the quadcal toolkit.

Errors that occur at a specific sweep point carry the offending frequency in
``frequency_hz`` (None when not applicable); file-format errors carry the
1-based ``line`` number.
"""


class QuadcalError(Exception):
    """Base class for all quadcal errors."""

    def __init__(self, message, frequency_hz=None):
        if frequency_hz is not None:
            message = f"{message} (at {frequency_hz / 1e9:.6g} GHz)"
        super().__init__(message)
        self.frequency_hz = frequency_hz


# --- core network algebra ---------------------------------------------------

class GridMismatch(QuadcalError):
    """Binary operation on networks whose frequency grids differ."""


class ZeroTransmission(QuadcalError):
    """S21 is exactly zero; T-parameters are undefined."""


class SingularT(QuadcalError):
    """T11 is zero; the S-parameter image is undefined."""


# --- touchstone files -------------------------------------------------------

class TouchstoneError(QuadcalError):
    """Base class for Touchstone read errors."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class MalformedOptionLine(TouchstoneError):
    pass


class NonMonotonicFrequency(TouchstoneError):
    pass


class WrongValueCount(TouchstoneError):
    pass


class EmptyFile(TouchstoneError):
    pass


class UnsupportedVersion(TouchstoneError):
    """Touchstone v2 ([Version] / bracket keywords) is not supported."""


# --- config files -----------------------------------------------------------

class ConfigError(QuadcalError):
    """Structured-text config file error, with file and line context."""

    def __init__(self, message, source=None, line=None):
        where = ""
        if source is not None:
            where = f"{source}:"
        if line is not None:
            where = f"{where}{line}:"
        if where:
            message = f"{where} {message}"
        super().__init__(message)
        self.source = source
        self.line = line


# --- standards models -------------------------------------------------------

class NonPhysical(QuadcalError):
    """Evaluated reflection magnitude exceeds 1 beyond tolerance."""


class IllConditioned(QuadcalError):
    """Least-squares system condition estimate exceeds the accepted bound."""


# --- error model ------------------------------------------------------------

class PoleHit(QuadcalError):
    """Reflection sits on the pole of the error-box bilinear transform."""


class SingularCorrection(QuadcalError):
    """De-embedding transform is singular at some frequency."""


class SingularEmbedding(QuadcalError):
    """Forward measurement model is singular at some frequency."""


# --- calibration solvers ----------------------------------------------------

class SolverError(QuadcalError):
    """Base class for calibration-solver failures."""


class DegenerateStandards(SolverError):
    """Defined one-port standards are not mutually distinct."""


class SingularSystem(SolverError):
    """Per-frequency linear solve failed."""


class SignAmbiguous(SolverError):
    """Both square-root signs fit the thru delay estimate equally well."""


class LowTransmission(SolverError):
    """Reciprocal thru transmission too low for a usable SOLR solve."""


class AllPairsDegenerate(SolverError):
    """Every line pair is near a half-wavelength multiple at every point."""


class BranchTrackingLost(SolverError):
    """Eigenvalue branch assignment cannot be seeded or continued."""


class DisconnectedTree(SolverError):
    """Port-pair graph does not connect all ports."""


class InconsistentSharedPort(SolverError):
    """A port shared between pairwise calibrations has conflicting terms."""


class InconsistentK(SolverError):
    """Redundant transmission-tracking pair disagrees with the spanning tree."""


# --- harness ----------------------------------------------------------------

class InvalidScenario(QuadcalError):
    """Synthetic-measurement scenario is not well formed."""
