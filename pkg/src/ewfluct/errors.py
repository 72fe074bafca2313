"""Exception types shared across the package."""


class EwfluctError(Exception):
    """Base class for all package errors."""


# -- covariance model ---------------------------------------------------------

class NonPositiveSpectrum(EwfluctError):
    """Sampled spectral density has an eigenvalue below -tol."""


class DimensionError(EwfluctError):
    """Model is degenerate in the requested dimension."""


class UnsupportedEvaluation(EwfluctError):
    """Pointwise evaluation requested where only grid evaluation exists."""


class MissingProfile(EwfluctError):
    """Effective-variance quadrature needs a correlation profile."""


class NotPSD(EwfluctError):
    """A matrix expected to be positive semidefinite is not."""


class DomainError(EwfluctError):
    """Operation restricted to a parameter regime it was not given."""


# -- grids, fields, noise -----------------------------------------------------

class SizeMismatch(EwfluctError):
    """Array shape inconsistent with the grid."""


class NegativeTime(EwfluctError):
    """Propagation time must be nonnegative."""


class GridResolutionError(EwfluctError):
    """Grid too coarse to resolve the noise correlation structure."""


class DegenerateDt(EwfluctError):
    """Time step must be strictly positive."""


class TooFewSamples(EwfluctError):
    """Statistical estimator called with too few samples."""


# -- solvers ------------------------------------------------------------------

class BlowupDetected(EwfluctError):
    """Sup-norm guard exceeded; the time step is too large."""


class GridMismatch(EwfluctError):
    """Operands live on different grids."""


class CFLViolation(EwfluctError):
    """Explicit finite-difference step violates the parabolic CFL bound."""


class EmptyTrajectory(EwfluctError):
    """Trajectory holds no usable snapshots."""


# -- post-processing ----------------------------------------------------------

class TimeMismatch(EwfluctError):
    """Trajectories do not share record times."""


class DegenerateInput(EwfluctError):
    """Fit input has no usable spread."""


class NonUniformTimes(EwfluctError):
    """Estimator requires a uniform time grid."""


class DegenerateSample(EwfluctError):
    """Sample has (numerically) zero variance."""


class NotADensity(EwfluctError):
    """Initial profile is negative somewhere or not normalised."""


# -- configuration ------------------------------------------------------------

class ConfigError(EwfluctError):
    """Configuration invalid; carries the full list of violations."""

    def __init__(self, violations):
        self.violations = list(violations)
        super().__init__("; ".join(str(v) for v in self.violations))


class UnknownKey(ConfigError):
    """Config contains a key outside the documented schema."""


class MissingSection(ConfigError):
    """Config lacks a required section or key."""


class ConstraintViolation(ConfigError):
    """Config values violate a solver constraint inequality."""
