"""Exception hierarchy. Every error carries a short machine-readable ``code``."""


class VortexGasError(Exception):
    code = "error"

    def __init__(self, message: str = "", code: str | None = None):
        if code is not None:
            self.code = code
        super().__init__(f"{self.code}: {message}" if message else self.code)


class InvalidSpec(VortexGasError, ValueError):
    code = "invalid-spec"


class SingularDiagonal(VortexGasError, ValueError):
    code = "singular-diagonal"


class CutoffTooSmall(VortexGasError, ValueError):
    code = "cutoff-too-small"


class CoincidentVortices(VortexGasError, ValueError):
    code = "coincident-vortices"


class NonFiniteEnergy(VortexGasError, FloatingPointError):
    code = "non-finite-energy"


class InsufficientSamples(VortexGasError, ValueError):
    code = "insufficient-samples"


class NotMeanZero(VortexGasError, ValueError):
    code = "not-mean-zero"


class BadRange(VortexGasError, ValueError):
    code = "bad-range"


class NTooLarge(VortexGasError, ValueError):
    code = "N-too-large"


class InvalidDensity(VortexGasError, ValueError):
    code = "invalid-density"


class NoiseDominated(VortexGasError, RuntimeError):
    code = "noise-dominated"


class ConfigInvalid(VortexGasError, ValueError):
    code = "config-invalid"


class ContractViolation(VortexGasError, AssertionError):
    code = "contract-violation"


class ManifestMissing(VortexGasError, FileNotFoundError):
    code = "manifest-missing"
