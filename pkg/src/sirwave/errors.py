"""Exception hierarchy shared by all modules."""


class SirWaveError(Exception):
    """Base class for every error raised by the package."""


class ConfigError(SirWaveError):
    """A configuration field is missing, unknown or out of range."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"{field}: {message}")


class NoEndemicState(SirWaveError):
    pass


class NonConvergence(SirWaveError):
    pass


class DomainViolation(SirWaveError):
    pass


class PqmVerificationFailed(SirWaveError):
    def __init__(self, message, sample=None):
        self.sample = sample
        super().__init__(message)


class NoPositiveRoot(SirWaveError):
    pass


class ComplexRoots(SirWaveError):
    pass


class ContinuationFailed(SirWaveError):
    def __init__(self, message, last_r=None, last_eta=None):
        self.last_r = last_r
        self.last_eta = last_eta
        super().__init__(f"{message} (last good r={last_r}, eta={last_eta})")


class CertificateFailed(SirWaveError):
    def __init__(self, message, eta=None, modulus=None):
        self.eta = eta
        self.modulus = modulus
        super().__init__(message)


class BoundaryRoot(SirWaveError):
    pass


class NoCertificate(SirWaveError):
    pass


class QuadratureStalled(SirWaveError):
    pass


class FitFailed(SirWaveError):
    pass


class GridMismatch(SirWaveError):
    pass


class InfeasibleSolcond(SirWaveError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(message)


class BreakNotFound(SirWaveError):
    pass


class CaseViolation(SirWaveError):
    def __init__(self, equation, case, t, value):
        self.equation = equation
        self.case = case
        self.t = t
        self.value = value
        super().__init__(
            f"equation {equation}, case {case}: value {value:.3e} at t={t:.4f}")


class MonotonicityViolation(SirWaveError):
    pass


class MaxIterExceeded(SirWaveError):
    def __init__(self, message, trace=None):
        self.trace = trace
        super().__init__(message)


class BlowUp(SirWaveError):
    pass


class HistoryUnderflow(SirWaveError):
    pass


class NoFront(SirWaveError):
    pass
