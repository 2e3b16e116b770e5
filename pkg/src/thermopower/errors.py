"""Exception types shared across the package."""


class ThermoError(Exception):
    """Base class for all thermopower errors."""


# --- trace construction / parsing ---

class InvalidSample(ThermoError):
    """A sample field is non-finite or power is not positive."""


class MalformedRow(ThermoError):
    def __init__(self, line_no: int, reason: str):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no


class NonMonotonicTime(ThermoError):
    """Sample times are not strictly increasing."""


class EmptyTrace(ThermoError):
    """Fewer than 3 samples; nothing can be fitted."""


class MissingMeta(ThermoError):
    """Required metadata (freq_ghz or cores) absent from the header."""


class InvalidParams(ThermoError):
    """Parameter values out of range (trace metadata or generator settings)."""


# --- fitting ---

class DegenerateInput(ThermoError):
    """Not enough distinct temperatures (or flat data) for the requested fit."""


class NoConvergence(ThermoError):
    """Iterative fit hit the iteration cap while still taking large steps."""


class InitFailure(ThermoError):
    """Exponential fit could not build a positive-argument log initialization."""


class LengthMismatch(ThermoError):
    """Paired sequences have different lengths."""


class ZeroMeasurement(ThermoError):
    """A measured power of zero makes relative residuals undefined."""


class EmptyGroup(ThermoError):
    """Aggregation requested over an empty group."""


class AllTies(ThermoError):
    """Sign test has no informative pairs after tie removal."""


# --- power model ---

class InvalidFreq(ThermoError):
    """Frequency must be a positive number of GHz."""


class InvalidCores(ThermoError):
    """Active core count must be an integer in 1..4."""


class InsufficientSpan(ThermoError):
    """Calibration needs >= 8 observations over >= 3 frequencies and >= 2 core counts."""


class SingularFit(ThermoError):
    """Calibration regression is rank-deficient or produced non-finite coefficients."""


# --- debias metrics ---

class ZeroSpread(ThermoError):
    """Measured powers have zero spread; the fluctuation ratio is undefined."""


# --- sensor correction ---

class ZeroDenominator(ThermoError):
    """The correction-factor denominator crosses zero at the given time."""

    def __init__(self, t: float, index: int | None = None):
        where = f" (sample index {index})" if index is not None else ""
        super().__init__(f"correction denominator is zero at t={t!r}{where}")
        self.t = t
        self.index = index


class NonPositiveTime(ThermoError):
    """The sensor correction is only defined for t > 0."""
