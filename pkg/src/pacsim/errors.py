"""Exception hierarchy shared across pacsim modules."""


class PacsimError(Exception):
    """Base class for all pacsim errors."""


class DomainError(PacsimError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class ConfigurationError(PacsimError, ValueError):
    """Circuit pieces were combined with incompatible parameters."""


class ApproximationRegimeError(PacsimError, ValueError):
    """A current-mode readout was requested outside the small-load regime."""


class TopologyError(PacsimError):
    """A resistive network is disconnected or its nodal system is singular."""


class CalibrationError(PacsimError, ValueError):
    """Decomposer ladder levels or thresholds are malformed."""


class BuildError(PacsimError, ValueError):
    """An expression cannot be mapped onto composer circuits."""


class EvaluationError(PacsimError):
    """A composer tree cannot be evaluated (unbound leaf, missing ladder)."""


class StructureError(PacsimError, ValueError):
    """A Bayesian network is cyclic or not singly connected."""


class InconsistentEvidenceError(PacsimError):
    """Observed evidence has zero probability under the model."""


class SchedulingError(PacsimError):
    """A message was requested before its inputs were available."""


class CapacityError(PacsimError):
    """A brute-force computation would exceed its state-space budget."""


class ParseError(PacsimError, ValueError):
    """A text input file is malformed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
