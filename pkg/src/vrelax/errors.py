"""Exception taxonomy.

Four families, matching how callers should react:

* domain errors (bad quantum numbers, bad angles, bad table points) are
  ``ValueError`` subclasses and mean the inputs are malformed;
* contract violations (inconsistent rate tables handed to a builder) mean a
  caller bypassed the assembly functions or mutated a table;
* numerical aborts are raised mid-propagation when the state stops being a
  density matrix;
* config errors cover everything wrong with an INI file or preset name and
  map to CLI exit code 2.
"""

from __future__ import annotations


class VrelaxError(Exception):
    """Base class for every error this package raises deliberately."""


class AngularDomainError(VrelaxError, ValueError):
    """Malformed quantum numbers or polarization indices."""


class DistributionDomainError(VrelaxError, ValueError):
    """Bad angular-distribution input: negative occupation, bad grid, bad CSV."""


class QuadratureOrderError(VrelaxError, ValueError):
    """Quadrature order below the supported minimum."""


class SchemeError(VrelaxError, ValueError):
    """Level scheme that is not a radiatively coupled V-type system."""


class RateSetContractError(VrelaxError):
    """A rate table failed its internal consistency checks (the trace
    identities) and cannot be turned into a superoperator."""


class NumericalAbortError(VrelaxError):
    """Propagation left the physical state space beyond tolerance.

    Carries the time and the offending monitor value.
    """

    def __init__(self, message: str, *, time: float, value: float) -> None:
        super().__init__(message)
        self.time = time
        self.value = value


class ConvergenceError(VrelaxError):
    """Long-time relaxation did not reach the requested residual."""


class DegenerateSteadyStateError(VrelaxError):
    """The generator has more than one steady state.

    ``dimension`` is the numerically determined null-space dimension.
    """

    def __init__(self, dimension: int) -> None:
        super().__init__(
            f"steady state is not unique: generator null space has dimension "
            f"{dimension}; pick an initial state and propagate instead"
        )
        self.dimension = dimension


class ConfigError(VrelaxError):
    """Anything wrong with a configuration file, preset, or CLI option set."""
