class KComplexError(Exception):
    pass


class DivisionByZero(KComplexError, ZeroDivisionError):
    pass


class ParseError(KComplexError, ValueError):
    pass


class NonUnitJet(KComplexError):
    pass


class BadIndex(KComplexError, IndexError):
    pass


class BadVariance(KComplexError):
    pass


class BadContraction(KComplexError):
    pass


class BadClass(KComplexError):
    pass


class BadStage(KComplexError):
    pass


class DegenerateCovector(KComplexError):
    pass


class NotInKernel(KComplexError):
    pass


class NoPreimage(KComplexError):
    pass


class BadCurvature(KComplexError):
    pass


class BadDecomposition(KComplexError):
    pass


class NotQuaternionicKahler(KComplexError):
    pass


class BadSlots(KComplexError):
    pass


class UnsupportedDimension(KComplexError):
    pass


class OrderUnderflow(KComplexError):
    pass


class SingularConformalFactor(KComplexError):
    pass


class UnsupportedBackend(KComplexError):
    pass


class BadHypothesis(KComplexError):
    pass


class ConfigError(KComplexError):
    pass


class IoError(KComplexError, OSError):
    pass
