"""
Exception hierarchy for ElastoScan
"""


class ElastoScanError(Exception):
    """Base class for every error raised by the toolkit"""


# Special functions
class OrderOutOfRangeError(ElastoScanError, ValueError):
    """Bessel order outside the supported set {0, 1}"""


class SingularArgumentError(ElastoScanError, ValueError):
    """Y_n / H_n evaluated at t = 0"""


# Geometry
class RegistryError(ElastoScanError, KeyError):
    """Unknown surface id or malformed surface expression"""

    def __str__(self):
        return str(self.args[0]) if self.args else ''


class InvalidGridError(ElastoScanError, ValueError):
    """Direction or sampling grid with unusable counts"""


class GeometryError(ElastoScanError, ValueError):
    """Inconsistent measurement geometry (e.g. a <= f_sup)"""


# Kernels
class SingularPointError(ElastoScanError, ValueError):
    """Kernel evaluated at coincident points"""


class QuadratureResidueError(ElastoScanError, ArithmeticError):
    """Full-circle superposition left an imaginary residue"""


# Forward solver
class ResolutionError(ElastoScanError, ValueError):
    """Boundary discretisation below the required nodes per wavelength"""


class SingularSystemError(ElastoScanError, ArithmeticError):
    """The Nystrom matrix could not be factorized"""


class DomainError(ElastoScanError, ValueError):
    """Field requested on or below the surface"""


# Imaging
class ShapeMismatchError(ElastoScanError, ValueError):
    """Dataset dimensions disagree with the line / direction grid"""


# Persistence
class DatasetFormatError(ElastoScanError, IOError):
    """File is not a dataset, or its header is unreadable"""


class DatasetVersionError(DatasetFormatError):
    """Dataset written by another format version"""

    def __init__(self, found: int, expected: int):
        super().__init__(f"dataset format version {found} is not supported (expected version {expected})")
        self.found = found
        self.expected = expected


class DatasetChecksumError(DatasetFormatError):
    """Payload truncated or corrupted"""


# Harness
class ConfigError(ElastoScanError, ValueError):
    """Experiment configuration rejected; `problems` lists field-level messages"""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__('; '.join(self.problems))


class GeometryMismatchError(ElastoScanError, ValueError):
    """Dataset geometry differs from the experiment configuration"""
