"""Exception hierarchy shared across the toolkit.

Every failure mode that callers are expected to handle gets its own class so
that pipeline code can react per condition instead of parsing messages.
"""


class ShoulderCTError(Exception):
    """Base class for all toolkit errors."""


# --- volume / preprocessing ------------------------------------------------

class InvalidIntensity(ShoulderCTError):
    """Volume contains non-finite intensities."""


class EmptyForeground(ShoulderCTError):
    """Label map has no foreground voxels to crop around."""


class CoverageGap(ShoulderCTError):
    """Patch set does not cover every voxel of the target volume."""


class OrientationUnknown(ShoulderCTError):
    """Sagittal axis cannot be determined from volume metadata."""


class FormatError(ShoulderCTError):
    """File container is malformed or has the wrong magic number."""


# --- losses ----------------------------------------------------------------

class EmptyClass(ShoulderCTError):
    """Requested class has no voxels in the label map."""


class ShapeError(ShoulderCTError):
    """Array arguments have incompatible shapes."""


class DegenerateClass(ShoulderCTError):
    """A class has zero observed cases; weights are undefined."""


# --- reconstruction --------------------------------------------------------

class EmptySurface(ShoulderCTError):
    """Scalar field never crosses the iso level."""


class EmptyMesh(ShoulderCTError):
    """Mesh has no vertices or triangles."""


class InvalidDistance(ShoulderCTError):
    """Distance argument is negative."""


# --- GH localization -------------------------------------------------------

class InsufficientSurface(ShoulderCTError):
    """Too few surface points to fit the humeral head sphere."""


class MissingScapula(ShoulderCTError):
    """Scapula region required for joint localization is empty."""


# --- evaluation ------------------------------------------------------------

class UndefinedMetric(ShoulderCTError):
    """Overlap metric undefined (class absent in truth and prediction)."""


class LabelError(ShoulderCTError):
    """Class label outside the configured range."""


class PairingError(ShoulderCTError):
    """Paired samples have mismatched lengths or missing cases."""


class DegeneratePairs(ShoulderCTError):
    """All paired differences are zero; the signed-rank test is undefined."""


# --- phantom / pipeline ----------------------------------------------------

class GridOverflow(ShoulderCTError):
    """Phantom geometry does not fit inside the voxel grid."""


class RangeError(ShoulderCTError):
    """Cohort parameter ranges cannot realize every requested class."""


class DataError(ShoulderCTError):
    """Training manifest is empty or inconsistent."""


class PipelineError(ShoulderCTError):
    """Cascaded inference failed; `stage` names the failing step."""

    def __init__(self, stage: str, message: str = ""):
        self.stage = stage
        super().__init__(f"{stage}: {message}" if message else stage)
