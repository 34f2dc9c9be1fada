"""Difference operators on a finite window of the integer lattice.

The infinite lattice is replaced by a window ``[n_min, n_max]`` with zero
values beyond both edges.  A first-order operator ``A = a + b T`` acts as

    (A f)(n) = a(n) f(n) + b(n) f(n + 1),

and its formal adjoint as ``(A^+ f)(n) = a(n) f(n) + b(n - 1) f(n - 1)``.
Second-order products are returned as symmetric tridiagonal operators.  They
are assembled as Gram matrices of the truncated first-order operator, so
they stay positive semidefinite after truncation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    LengthMismatch,
    NonPositiveB,
    ParameterError,
    ShiftTooLarge,
    WindowMismatch,
    ZeroA,
)

#: sites excluded at each window edge when comparing operator identities
EDGE = 2


def _frozen(values, name: str) -> np.ndarray:
    arr = np.array(values, dtype=float)
    if arr.ndim != 1:
        raise LengthMismatch(f"{name} must be one-dimensional")
    if not np.all(np.isfinite(arr)):
        raise ParameterError(f"{name} contains non-finite values")
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class LatticeWindow:
    n_min: int
    n_max: int

    def __post_init__(self):
        if int(self.n_min) != self.n_min or int(self.n_max) != self.n_max:
            raise ParameterError("window bounds must be integers")
        object.__setattr__(self, "n_min", int(self.n_min))
        object.__setattr__(self, "n_max", int(self.n_max))
        if self.n_max - self.n_min + 1 < 3:
            raise ParameterError(
                f"window [{self.n_min}, {self.n_max}] must contain at least 3 sites"
            )

    @property
    def size(self) -> int:
        return self.n_max - self.n_min + 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.n_min, self.n_max + 1)

    def index(self, n: int) -> int:
        if not self.n_min <= n <= self.n_max:
            raise IndexError(f"site {n} outside window [{self.n_min}, {self.n_max}]")
        return n - self.n_min

    def interior(self, edge: int = EDGE) -> np.ndarray:
        """Boolean mask of sites at least ``edge`` sites away from both ends."""
        mask = np.zeros(self.size, dtype=bool)
        mask[edge:self.size - edge] = True
        return mask

    @classmethod
    def symmetric(cls, half_width: int) -> "LatticeWindow":
        return cls(-half_width, half_width)


@dataclass(frozen=True)
class LatticeFunction:
    window: LatticeWindow
    values: np.ndarray

    def __post_init__(self):
        vals = _frozen(self.values, "values")
        if vals.size != self.window.size:
            raise LengthMismatch(
                f"got {vals.size} values for a window of {self.window.size} sites"
            )
        object.__setattr__(self, "values", vals)

    @classmethod
    def delta(cls, window: LatticeWindow, n: int) -> "LatticeFunction":
        v = np.zeros(window.size)
        v[window.index(n)] = 1.0
        return cls(window, v)

    @classmethod
    def zeros(cls, window: LatticeWindow) -> "LatticeFunction":
        return cls(window, np.zeros(window.size))

    def __call__(self, n: int) -> float:
        return float(self.values[self.window.index(n)])

    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    def inner(self, other: "LatticeFunction") -> float:
        _same_window(self.window, other.window)
        return float(self.values @ other.values)

    def normalized(self) -> "LatticeFunction":
        nrm = self.norm()
        if nrm == 0.0:
            raise ParameterError("cannot normalize the zero function")
        return LatticeFunction(self.window, self.values / nrm)

    def __add__(self, other: "LatticeFunction") -> "LatticeFunction":
        _same_window(self.window, other.window)
        return LatticeFunction(self.window, self.values + other.values)

    def __mul__(self, scalar: float) -> "LatticeFunction":
        return LatticeFunction(self.window, scalar * self.values)

    __rmul__ = __mul__


@dataclass(frozen=True)
class FirstOrderOp:
    """``A = a + b T`` with ``b > 0`` and ``a != 0`` at every window site."""

    window: LatticeWindow
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        a = _frozen(self.a, "a")
        b = _frozen(self.b, "b")
        if a.size != self.window.size or b.size != self.window.size:
            raise LengthMismatch(
                f"coefficient lengths ({a.size}, {b.size}) do not match window size "
                f"{self.window.size}"
            )
        bad = np.flatnonzero(b <= 0)
        if bad.size:
            n = int(self.window.sites[bad[0]])
            raise NonPositiveB(f"b({n}) = {b[bad[0]]!r} is not positive")
        bad = np.flatnonzero(a == 0)
        if bad.size:
            n = int(self.window.sites[bad[0]])
            raise ZeroA(f"a({n}) vanishes")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    def matrix(self) -> np.ndarray:
        """Square truncation: the coupling ``b(n_max)`` leaves the window."""
        return np.diag(self.a) + np.diag(self.b[:-1], 1)


@dataclass(frozen=True)
class TridiagonalOp:
    """Symmetric tridiagonal operator; ``off[i]`` couples sites ``i`` and ``i+1``.

    ``valid`` flags sites whose entries are meaningful.  Only
    :func:`shift_conjugate` produces invalid sites.
    """

    window: LatticeWindow
    diag: np.ndarray
    off: np.ndarray
    valid: np.ndarray = field(default=None)

    def __post_init__(self):
        d = _frozen(self.diag, "diag")
        u = _frozen(self.off, "off")
        if d.size != self.window.size or u.size != self.window.size - 1:
            raise LengthMismatch("diag/off lengths do not match the window")
        if self.valid is None:
            valid = np.ones(d.size, dtype=bool)
        else:
            valid = np.array(self.valid, dtype=bool)
            if valid.size != d.size:
                raise LengthMismatch("valid mask does not match the window")
        valid.flags.writeable = False
        object.__setattr__(self, "diag", d)
        object.__setattr__(self, "off", u)
        object.__setattr__(self, "valid", valid)

    @property
    def off_valid(self) -> np.ndarray:
        return self.valid[:-1] & self.valid[1:]

    def matrix(self) -> np.ndarray:
        return np.diag(self.diag) + np.diag(self.off, 1) + np.diag(self.off, -1)

    def matvec(self, v: np.ndarray) -> np.ndarray:
        out = self.diag * v
        out[:-1] += self.off * v[1:]
        out[1:] += self.off * v[:-1]
        return out

    def __call__(self, f: LatticeFunction) -> LatticeFunction:
        _same_window(self.window, f.window)
        return LatticeFunction(self.window, self.matvec(f.values))

    def scaled(self, factor: float, shift: float = 0.0) -> "TridiagonalOp":
        """Return ``factor * L + shift``."""
        return TridiagonalOp(
            self.window, factor * self.diag + shift, factor * self.off, self.valid
        )


def _same_window(w1: LatticeWindow, w2: LatticeWindow) -> None:
    if w1 != w2:
        raise WindowMismatch(f"window {w1} does not match {w2}")


def make_first_order(a, b, window: LatticeWindow) -> FirstOrderOp:
    return FirstOrderOp(window, a, b)


def apply(A: FirstOrderOp, f: LatticeFunction) -> LatticeFunction:
    """``(A f)(n) = a(n) f(n) + b(n) f(n+1)``; ``f`` vanishes past ``n_max``."""
    _same_window(A.window, f.window)
    v = f.values
    g = A.a * v
    g[:-1] += A.b[:-1] * v[1:]
    return LatticeFunction(A.window, g)


def apply_adjoint(A: FirstOrderOp, f: LatticeFunction) -> LatticeFunction:
    """``(A^+ f)(n) = a(n) f(n) + b(n-1) f(n-1)``; ``f`` vanishes before ``n_min``."""
    _same_window(A.window, f.window)
    v = f.values
    g = A.a * v
    g[1:] += A.b[:-1] * v[:-1]
    return LatticeFunction(A.window, g)


def lower_product(A: FirstOrderOp) -> TridiagonalOp:
    """``A A^+``: ``d(n) = a(n)^2 + b(n)^2``, ``u(n) = a(n+1) b(n)``.

    This is the Gram matrix of the rows of A kept with their outgoing
    coupling ``b(n_max)``, hence positive semidefinite.
    """
    d = A.a**2 + A.b**2
    u = A.a[1:] * A.b[:-1]
    return TridiagonalOp(A.window, d, u)


def raise_product(A: FirstOrderOp) -> TridiagonalOp:
    """``A^+ A`` of the square truncation: ``d(n) = a(n)^2 + b(n-1)^2``, ``u(n) = a(n) b(n)``."""
    d = A.a**2
    d[1:] += A.b[:-1] ** 2
    u = A.a[:-1] * A.b[:-1]
    return TridiagonalOp(A.window, d, u)


def shift_conjugate(L: TridiagonalOp, s: int) -> TridiagonalOp:
    """``T^{-s} L T^s``: entries move ``s`` sites to the right.

    Sites whose source lies outside the window are zero-filled and marked
    invalid.
    """
    size = L.window.size
    if abs(s) >= size:
        raise ShiftTooLarge(f"shift {s} does not fit a window of {size} sites")
    d = np.zeros(size)
    u = np.zeros(size - 1)
    valid = np.zeros(size, dtype=bool)
    if s >= 0:
        d[s:] = L.diag[:size - s]
        u[s:] = L.off[:size - 1 - s]
        valid[s:] = L.valid[:size - s]
    else:
        d[:size + s] = L.diag[-s:]
        u[:size - 1 + s] = L.off[-s:]
        valid[:size + s] = L.valid[-s:]
    return TridiagonalOp(L.window, d, u, valid)


def entry_differences(L1: TridiagonalOp, L2: TridiagonalOp, edge: int = EDGE):
    """Absolute entry differences on sites valid in both and away from the edges.

    Returns ``(diag_diff, off_diff)`` arrays restricted to the compared entries.
    """
    _same_window(L1.window, L2.window)
    mask = L1.valid & L2.valid & L1.window.interior(edge)
    omask = mask[:-1] & mask[1:]
    return np.abs(L1.diag - L2.diag)[mask], np.abs(L1.off - L2.off)[omask]


def chain_residual(A_j: FirstOrderOp, A_jm1: FirstOrderOp, alpha_j: float, q: float,
                   edge: int = EDGE) -> float:
    """Bulk defect of ``A_j A_j^+ - alpha_j = q A_{j-1}^+ A_{j-1}``."""
    _same_window(A_j.window, A_jm1.window)
    left = lower_product(A_j).scaled(1.0, -alpha_j)
    right = raise_product(A_jm1).scaled(q)
    dd, du = entry_differences(left, right, edge)
    return float(max(dd.max(initial=0.0), du.max(initial=0.0)))


def norm_bound(L: TridiagonalOp) -> float:
    """Row-sum (Gershgorin) bound on the spectral radius of the truncated matrix."""
    rows = np.abs(L.diag).copy()
    rows[:-1] += np.abs(L.off)
    rows[1:] += np.abs(L.off)
    return float(rows.max())
