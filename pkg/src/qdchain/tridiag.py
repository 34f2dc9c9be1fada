"""Eigenvalues of symmetric tridiagonal operators by Sturm-sequence bisection.

This is the independent oracle against which Darboux-scheme spectra are
checked: it only sees the assembled matrix entries, never the chain
structure.  Eigenvectors come from inverse iteration.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
from scipy.linalg import solve_banded

from .errors import LengthMismatch, NotConverged, ParameterError
from .lattice import LatticeFunction, TridiagonalOp, norm_bound

_TINY = np.finfo(float).tiny


@dataclass(frozen=True)
class EigenRequest:
    op: TridiagonalOp
    count: int
    tol: float = 1e-13

    def __post_init__(self):
        if not 1 <= self.count <= self.op.window.size:
            raise ParameterError(
                f"count must be in [1, {self.op.window.size}], got {self.count}")
        if not self.tol > 0:
            raise ParameterError("tol must be positive")


def sturm_count(L: TridiagonalOp, x):
    """Number of eigenvalues strictly below ``x`` (vectorized over ``x``).

    Counts negative pivots of the LDL^T factorization of ``L - x``.  A pivot
    that is exactly zero is nudged to ``+pivmin`` so that an eigenvalue equal
    to ``x`` is not counted.  Off-diagonal entries below ~1e-154 square to
    zero, which splits the recurrence into independent blocks.
    """
    x = np.asarray(x, dtype=float)
    d, u2 = L.diag, L.off**2
    pivmin = _TINY * max(1.0, float(u2.max(initial=0.0)))
    count = np.zeros(x.shape, dtype=int)
    p = d[0] - x
    for i in range(d.size):
        if i:
            p = (d[i] - x) - u2[i - 1] / p
        p = np.where(np.abs(p) < pivmin, np.where(p < 0, -pivmin, pivmin), p)
        count += p < 0
    return int(count) if count.ndim == 0 else count


def smallest_eigenvalues(req: EigenRequest) -> np.ndarray:
    """The ``count`` smallest eigenvalues, each bracketed to width ``<= tol``."""
    L = req.op
    bound = norm_bound(L)
    k = np.arange(req.count)
    lo = np.full(req.count, -bound - 1.0)
    hi = np.full(req.count, bound + 1.0)
    for _ in range(400):
        width = hi - lo
        floor = 4.0 * np.spacing(np.maximum(np.abs(lo), np.abs(hi)))
        active = width > np.maximum(req.tol, floor)
        if not active.any():
            break
        mid = 0.5 * (lo + hi)
        below = sturm_count(L, mid) > k
        hi = np.where(active & below, mid, hi)
        lo = np.where(active & ~below, mid, lo)
    return 0.5 * (lo + hi)


def _shifted_bands(L: TridiagonalOp, shift: float) -> np.ndarray:
    n = L.window.size
    ab = np.zeros((3, n))
    ab[0, 1:] = L.off
    ab[1] = L.diag - shift
    ab[2, :-1] = L.off
    return ab


def eigenvector(L: TridiagonalOp, lam: float, tol: float = 1e-13, *,
                seed: int = 0, against: Sequence[np.ndarray] = (),
                max_iter: int = 5) -> LatticeFunction:
    """Unit eigenvector for an isolated eigenvalue near ``lam`` by inverse iteration.

    ``against`` holds already-computed vectors of a cluster; the iterate is
    kept orthogonal to them.  The sign is fixed so that the entry of largest
    magnitude is positive.
    """
    bound = norm_bound(L)
    limit = 10.0 * tol * max(bound, 1.0)
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(L.window.size)
    v /= np.linalg.norm(v)
    # an exact eigenvalue makes the shifted matrix singular
    shift = lam + max(tol, 1e-14 * bound)
    ab = _shifted_bands(L, shift)
    resid = np.inf
    for _ in range(max_iter):
        for w in against:
            v = v - (w @ v) * w
        y = solve_banded((1, 1), ab, v)
        for w in against:
            y = y - (w @ y) * w
        nrm = np.linalg.norm(y)
        if not np.isfinite(nrm) or nrm == 0.0:
            raise NotConverged(f"inverse iteration broke down at lambda = {lam!r}")
        v = y / nrm
        resid = float(np.linalg.norm(L.matvec(v) - lam * v))
        if resid <= limit:
            break
    if resid > limit:
        raise NotConverged(
            f"inverse iteration residual {resid:.3e} exceeds {limit:.3e} at lambda = {lam!r}")
    i = int(np.argmax(np.abs(v)))
    if v[i] < 0:
        v = -v
    return LatticeFunction(L.window, v)


def eigenvectors(L: TridiagonalOp, lams: Sequence[float], tol: float = 1e-13,
                 seed: int = 0) -> list:
    """Eigenvectors for sorted eigenvalues, reorthogonalizing inside clusters."""
    out = []
    for i, lam in enumerate(lams):
        cluster = [out[m].values for m in range(i) if abs(lams[m] - lam) < 10.0 * tol]
        out.append(eigenvector(L, lam, tol, seed=seed + i, against=cluster))
    return out


@dataclass(frozen=True)
class SpectrumComparison:
    max_abs_diff: float
    per_level: tuple

    def to_dict(self) -> dict:
        return {"max_abs_diff": self.max_abs_diff, "per_level": list(self.per_level)}


def compare_spectra(predicted, oracle) -> SpectrumComparison:
    pred = np.asarray(getattr(predicted, "levels", predicted), dtype=float)
    orc = np.asarray(oracle, dtype=float)
    if pred.shape != orc.shape:
        raise LengthMismatch(f"{pred.size} predicted levels vs {orc.size} oracle values")
    diff = np.abs(pred - orc)
    return SpectrumComparison(float(diff.max(initial=0.0)), tuple(float(x) for x in diff))


def oracle_spectrum(L: TridiagonalOp, count: int, tol: float = 1e-13) -> np.ndarray:
    return smallest_eigenvalues(EigenRequest(L, count, tol))
