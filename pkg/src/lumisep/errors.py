"""Exception hierarchy.

Two families matter for the CLI exit-code contract: bad inputs (files,
formats, dimensions) exit with code 2, estimation failures (degenerate
geometry, empty sets) exit with code 3.
"""


class LumisepError(Exception):
    """Base class for all package errors."""


class InputError(LumisepError):
    """Invalid input data or configuration (CLI exit code 2)."""


class EstimationError(LumisepError):
    """Estimation cannot proceed on this data (CLI exit code 3)."""


# --- spectra / bases ---------------------------------------------------

class GridMismatch(InputError):
    """Spectral curves are not sampled on the shared wavelength grid."""


class DegenerateDatabase(EstimationError):
    """Spectra database has effective rank below the basis dimension."""


class ZeroProjection(EstimationError):
    """Spectrum is (numerically) orthogonal to the basis."""


class SingularCoupling(EstimationError):
    """Coupling system for the flash coefficients is ill-conditioned."""


# --- images ------------------------------------------------------------

class DimensionMismatch(InputError):
    """Image or field shapes do not agree."""


class EmptyField(EstimationError):
    """Field contains no valid pixels."""


# --- hull fitting ------------------------------------------------------

class AllPruned(EstimationError):
    """Every histogram bin fell below the pruning threshold."""


class EmptySet(EstimationError):
    """Direction set is empty."""


class ArcDegenerate(EstimationError):
    """All directions coincide; no arc can be fit."""


class CollinearSet(EstimationError):
    """Projected directions are collinear; a triangle cannot be fit."""


class CentroidDegenerate(EstimationError):
    """Weighted mean direction vanishes; no tangent plane exists."""


class BehindTangentPlane(EstimationError):
    """Direction lies on or behind the tangent-plane hemisphere."""


class AllCollinear(EstimationError):
    """2D point set is collinear; convex hull is degenerate."""


class DegenerateHull(EstimationError):
    """Convex polygon is degenerate (near-zero area)."""


class DegenerateLights(EstimationError):
    """Light coefficient vectors are too close to distinguish."""


class DegenerateDirections(EstimationError):
    """Photometric-stereo light directions are linearly dependent."""


# --- synthesis / metrics ----------------------------------------------

class InvalidCount(InputError):
    """Light count outside the supported range {1, 2, 3}."""


class ZeroTruth(InputError):
    """Reference image is identically zero; NMSE undefined."""


# --- file formats ------------------------------------------------------

class MalformedHeader(InputError):
    """File header does not parse as the expected format."""


class TruncatedData(InputError):
    """File payload is shorter than the header promises."""


class CountMismatch(InputError):
    """Number of edit entries does not match the number of lights."""
