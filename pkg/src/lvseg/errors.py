"""Exception types shared across the toolkit.

Validation problems (bad inputs, malformed bundles, out-of-range config) map to
CLI exit code 2; failures inside a pipeline stage map to exit code 3.
"""


class ValidationError(ValueError):
    """Input, configuration, or file contents violate a documented contract."""


class CoplanarityError(ValidationError):
    """A ray was expected to lie inside a slice plane but does not."""


class ParameterizationError(ValidationError):
    """A contour cannot be expressed as a star-shaped polar function."""


class DegenerateSampleError(ValueError):
    """A sample vector has zero variance and cannot be standardized."""


class DegenerateHistogramError(ValueError):
    """A histogram has fewer than two occupied bins; no threshold exists."""


class RegistrationFailure(RuntimeError):
    """No admissible candidate shift exists for the requested search."""


class NumericFailure(RuntimeError):
    """A numeric invariant broke (NaN/inf) during iteration."""


class StageError(RuntimeError):
    """A pipeline stage failed; carries the stage name for CLI reporting."""

    def __init__(self, stage, message):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
