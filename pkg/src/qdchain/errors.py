"""Exception hierarchy shared by every qdchain module."""

from __future__ import annotations


class QDChainError(Exception):
    """Base class for all errors raised by qdchain."""

    #: short machine-readable tag used by the CLI error stream
    code = "error"

    def to_dict(self) -> dict:
        return {"error": self.code, "message": str(self)}


class ParameterError(QDChainError, ValueError):
    code = "parameter"


class LengthMismatch(QDChainError, ValueError):
    code = "length_mismatch"


class WindowMismatch(QDChainError, ValueError):
    code = "window_mismatch"


class NonPositiveB(QDChainError, ValueError):
    code = "non_positive_b"


class ZeroA(QDChainError, ValueError):
    code = "zero_a"


class ShiftTooLarge(QDChainError, ValueError):
    code = "shift_too_large"


class PoleError(QDChainError, ArithmeticError):
    code = "pole"


class PoleProximity(PoleError):
    code = "pole_proximity"


class SingularAtZero(QDChainError, ArithmeticError):
    code = "singular_at_zero"


class KappaOutOfRange(ParameterError):
    """kappa violates the admissible window; ``bound`` names the side."""

    code = "kappa_out_of_range"

    def __init__(self, message: str, bound: str):
        super().__init__(message)
        self.bound = bound
        #: ``(value, label, site)`` of the lowest radicand, when a window was scanned
        self.radicand = None

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["bound"] = self.bound
        if self.radicand is not None:
            value, label, site = self.radicand
            d["min_radicand"] = {"value": value, "at": label, "site": site}
        return d


class NegativeCoefficient(QDChainError, ValueError):
    """A radicand xi or eta is not positive at some lattice site."""

    code = "negative_coefficient"

    def __init__(self, message: str, site: int, which: str, value: float):
        super().__init__(message)
        self.site = site
        self.which = which
        self.value = value

    def to_dict(self) -> dict:
        d = super().to_dict()
        d.update(site=self.site, which=self.which, value=self.value)
        return d


class NotSquareSummable(QDChainError, ArithmeticError):
    code = "not_square_summable"


class WindowTooSmall(QDChainError, ValueError):
    code = "window_too_small"


class NotConverged(QDChainError, ArithmeticError):
    code = "not_converged"


class SingularJacobian(NotConverged):
    code = "singular_jacobian"


class SchemaError(QDChainError, ValueError):
    code = "schema"

    def __init__(self, message: str, path: str = ""):
        super().__init__(f"{path}: {message}" if path else message)
        self.path = path

    def to_dict(self) -> dict:
        d = super().to_dict()
        d["path"] = self.path
        return d
