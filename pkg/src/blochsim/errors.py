"""Exception hierarchy.

ConfigError maps to CLI exit code 2, NumericalAbort (and subclasses) to exit
code 3.
"""


class BlochsimError(Exception):
    pass


class ConfigError(BlochsimError):
    """Invalid configuration, schema violation, or bad CLI arguments."""


class NumericalAbort(BlochsimError):
    """A numerical contract was violated; results would be untrustworthy."""


class DimensionMismatchError(NumericalAbort):
    pass


class NonHermitianError(NumericalAbort):
    pass


class NumericalConsistencyError(NumericalAbort):
    pass


class TruncationError(NumericalAbort):
    """Basis truncation too small for the requested state or displacement."""


class DegenerateGapError(NumericalAbort):
    """Spectral gap below tolerance where a non-degenerate gap is required."""


class FrameStepError(NumericalAbort):
    """Consecutive adiabatic frames too far apart for continuity tracking."""


class NormDriftError(NumericalAbort):
    pass


class AnalysisError(NumericalAbort):
    """An observable estimator could not produce a meaningful result."""
