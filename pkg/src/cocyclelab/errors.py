"""Exception types raised by construction and verification routines."""


class CocycleLabError(Exception):
    """Base class for all package-specific errors."""


class NonSmoothLambda(CocycleLabError):
    """Conformal factor has significant spectral content at the grid Nyquist."""


class StepTooLarge(CocycleLabError):
    """Requested integrator step exceeds the allowed fraction of the torus size."""


class SamplingTooCoarse(CocycleLabError):
    """Consecutive samples of a rotation loop differ by too large an angle to lift."""


class NonOrthogonalDrift(CocycleLabError):
    """Transported matrix drifted away from the orthogonal group beyond tolerance."""


class NotClosed(CocycleLabError):
    """Geodesic endpoint does not return to its starting point."""


class NotUnit(CocycleLabError):
    """Section fails the pointwise unit condition g^3 + g = 0, |g| = 1."""


class GNotHolomorphic(CocycleLabError):
    """Candidate direction field fails the covariant holomorphicity residual gate."""


class InputNotCertified(CocycleLabError):
    """Input pair + trivializer fail the transport residual gate."""


class PhiNotZero(CocycleLabError):
    """Operation requires a pair with vanishing Higgs field."""


class FactoryValidationFailed(CocycleLabError):
    """Constructed direction field failed its own validation residuals."""


class RankDeficient(CocycleLabError):
    """Top Fourier mode vanishes on too large a fraction of the grid."""


class ReductionFailed(CocycleLabError):
    """Degree reduction produced a direction field that fails its residual gates."""
