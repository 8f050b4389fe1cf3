"""Exception hierarchy. ``code`` is the name reported by the CLI."""


class IntertwineError(Exception):
    code = "IntertwineError"


class DimensionMismatch(IntertwineError, ValueError):
    code = "DimensionMismatch"


class EmptyChainSet(IntertwineError, ValueError):
    code = "EmptyChainSet"


class CountMismatch(IntertwineError, ValueError):
    code = "CountMismatch"


class SingularLeading(IntertwineError):
    code = "SingularLeading"


class SingularWronskian(IntertwineError):
    """The Wronskian falls below threshold; ``x`` is the first offending point."""

    code = "SingularWronskian"

    def __init__(self, x, value=None, threshold=None):
        msg = f"Wronskian vanishes (numerically) at x={x:.6g}"
        if value is not None:
            msg += f": |W|={abs(value):.3e} <= {threshold:.3e}"
        super().__init__(msg)
        self.x = x
        self.value = value
        self.threshold = threshold


class FactorInconsistent(IntertwineError):
    code = "FactorInconsistent"


class ExtensionCountMismatch(IntertwineError):
    code = "ExtensionCountMismatch"


class NormalizationFailure(IntertwineError):
    code = "NormalizationFailure"


class SymmetryViolated(IntertwineError):
    code = "SymmetryViolated"

    def __init__(self, mode, defect, tolerance):
        super().__init__(f"{mode} symmetry violated: defect {defect:.3e} > {tolerance:.3e}")
        self.mode = mode
        self.defect = defect
        self.tolerance = tolerance


class CompositionDefect(IntertwineError):
    code = "CompositionDefect"
