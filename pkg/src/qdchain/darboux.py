"""Spectra and eigenfunctions of chain operators via the Darboux scheme.

Every chain operator factorizes as ``L_j = q A_{j-1}^+ A_{j-1}``, so its
ground state spans the kernel of ``A_{j-1}`` and has eigenvalue 0.  The
intertwining ``L_{j+1} A_j^+ = q A_j^+ (L_j + alpha_j)`` moves eigenpairs
up the chain:

    lambda_{j+1,k+1} = q (lambda_{j,k} + alpha_j),   psi_{j+1,k+1} = A_j^+ psi_{j,k}.

After ``r`` steps the periodicity ``L_{j+r} = T^{-s} L_j T^s`` brings the
chain back to itself, up to a lattice shift of the eigenfunctions.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence, Union

import numpy as np

from .chain_r2 import ChainParams, chain_operator
from .errors import NotSquareSummable, ParameterError, WindowMismatch, WindowTooSmall
from .lattice import (
    EDGE,
    FirstOrderOp,
    LatticeFunction,
    LatticeWindow,
    TridiagonalOp,
    apply_adjoint,
    raise_product,
)

#: eigenfunction magnitude at the window edges, relative to the peak
TAIL_TOL = 1e-8


@dataclass(frozen=True)
class SpectrumTable:
    j: int
    levels: tuple

    def __len__(self):
        return len(self.levels)

    def __getitem__(self, k):
        return self.levels[k]


@dataclass(frozen=True)
class EigenPair:
    level: int
    lam: float
    psi: LatticeFunction


@dataclass(frozen=True)
class DarbouxChain:
    """Operators ``A_0, A_1, ..., A_r`` of a periodic chain on one window.

    ``ops[0]`` is ``T^s A_r T^{-s}``, the operator that factorizes ``L_1``.
    """

    q: float
    alphas: tuple
    s: int
    ops: tuple

    def __post_init__(self):
        if len(self.ops) != len(self.alphas) + 1:
            raise ParameterError("need operators A_0 .. A_r")
        w = self.ops[0].window
        if any(A.window != w for A in self.ops):
            raise WindowMismatch("chain operators live on different windows")

    @classmethod
    def from_params(cls, params: ChainParams, window: LatticeWindow) -> "DarbouxChain":
        """Closed-form r = 2 chain; ``A_0`` is evaluated exactly, not padded."""
        ops = tuple(chain_operator(params, window, j) for j in range(params.r + 1))
        return cls(params.q, params.alphas, params.s, ops)

    @property
    def r(self) -> int:
        return len(self.alphas)

    @property
    def window(self) -> LatticeWindow:
        return self.ops[0].window

    def alpha(self, j: int) -> float:
        return self.alphas[(j - 1) % self.r]

    def A(self, j: int) -> FirstOrderOp:
        if not 0 <= j <= self.r:
            raise ParameterError(f"operator index {j} outside 0..{self.r}")
        return self.ops[j]

    def L(self, j: int) -> TridiagonalOp:
        """Truncated ``L_j = q A_{j-1}^+ A_{j-1}`` (positive semidefinite)."""
        return raise_product(self.A(j - 1)).scaled(self.q)


def eigenvalue_table(params, j: int, K: int) -> SpectrumTable:
    """Levels ``lambda_{j,0..K}`` from the cyclic recursion.

    ``params`` is anything with ``q`` and ``alphas`` (ChainParams or
    DarbouxChain).
    """
    r = len(params.alphas)
    if not 1 <= j <= r:
        raise ParameterError(f"j must lie in 1..{r}, got {j}")
    if K < 0:
        raise ParameterError("K must be nonnegative")
    q = params.q
    lam = np.zeros((r + 1, K + 1))  # row i holds lambda_{i,.}; row 0 aliases row r
    for k in range(1, K + 1):
        for i in range(1, r + 1):
            prev = i - 1 if i > 1 else r
            lam[i, k] = q * (lam[prev, k - 1] + params.alphas[prev - 1])
    return SpectrumTable(j, tuple(float(x) for x in lam[j]))


def accumulation_point(params, j: int) -> float:
    """Limit of ``lambda_{j,k}``: the fixed point of r recursion steps."""
    r = len(params.alphas)
    q = params.q
    # lambda_{j,k+r} = q^r lambda_{j,k} + sum_m q^m alpha_{j-m}
    drift = sum(q**m * params.alphas[(j - m - 1) % r] for m in range(1, r + 1))
    return drift / (1.0 - q**r)


def _tails_ok(v: np.ndarray, tol: float = TAIL_TOL) -> bool:
    peak = np.abs(v).max()
    return peak > 0 and abs(v[0]) <= tol * peak and abs(v[-1]) <= tol * peak


def ground_state(A_prev: FirstOrderOp, window: LatticeWindow = None) -> LatticeFunction:
    """Unit-norm solution of ``A_prev psi = 0``, i.e. ``psi(n+1) = -a(n)/b(n) psi(n)``.

    The recursion is summed in log-magnitude form and anchored at its
    maximum, which avoids the overflow of the raw ratio product.
    """
    if window is not None and window != A_prev.window:
        raise WindowMismatch("ground_state window differs from the operator window")
    ratio = -A_prev.a[:-1] / A_prev.b[:-1]
    logmag = np.concatenate(([0.0], np.cumsum(np.log(np.abs(ratio)))))
    sign = np.concatenate(([1.0], np.cumprod(np.sign(ratio))))
    logmag -= logmag.max()
    psi = sign * np.exp(logmag)
    if not _tails_ok(psi):
        raise NotSquareSummable(
            f"kernel of A does not decay at both edges of [{A_prev.window.n_min}, "
            f"{A_prev.window.n_max}] (edge/peak = {abs(psi[0]):.2e}, {abs(psi[-1]):.2e})")
    psi /= np.linalg.norm(psi)
    i = int(np.argmax(np.abs(psi)))
    if psi[i] < 0:
        psi = -psi
    return LatticeFunction(A_prev.window, psi)


def ladder(psi: LatticeFunction, A_j: FirstOrderOp) -> LatticeFunction:
    """``A_j^+ psi``: maps an eigenfunction of ``L_j`` to one of ``L_{j+1}``."""
    return apply_adjoint(A_j, psi)


def _shift_left(v: np.ndarray, s: int) -> np.ndarray:
    """``(T^s v)(n) = v(n + s)`` with zero fill past the right edge."""
    out = np.zeros_like(v)
    out[:v.size - s] = v[s:]
    return out


def _as_chain(chain, window):
    if isinstance(chain, DarbouxChain):
        if window is not None and window != chain.window:
            raise WindowMismatch("window differs from the chain's window")
        return chain
    if window is None:
        raise ParameterError("a window is required when passing ChainParams")
    return DarbouxChain.from_params(chain, window)


def ladder_states(chain: DarbouxChain, K: int) -> dict:
    """All ``psi_{i,k}`` for ``i = 1..r``, ``k = 0..K`` as unit-norm arrays.

    ``psi_{1,k}`` comes from ``A_0^+`` applied to ``T^s psi_{r,k-1}``, the
    eigenfunction of ``L_0 = T^s L_r T^{-s}``.
    """
    r = chain.r
    states = {}
    for i in range(1, r + 1):
        states[i, 0] = ground_state(chain.A(i - 1)).values
    for k in range(1, K + 1):
        for i in range(1, r + 1):
            if i == 1:
                src = _shift_left(states[r, k - 1], chain.s)
            else:
                src = states[i - 1, k - 1]
            A = chain.A(i - 1)
            img = apply_adjoint(A, LatticeFunction(chain.window, src)).values
            nrm = np.linalg.norm(img)
            if nrm == 0.0 or not np.isfinite(nrm):
                raise WindowTooSmall(f"ladder image vanished at level {k} of L_{i}")
            states[i, k] = img / nrm
    return states


def eigenbasis(chain: Union[ChainParams, DarbouxChain], j: int, K: int,
               window: LatticeWindow = None) -> list:
    """Eigenpairs ``(lambda_{j,k}, psi_{j,k})``, ``k = 0..K``, by the Darboux scheme."""
    chain = _as_chain(chain, window)
    table = eigenvalue_table(chain, j, K)
    states = ladder_states(chain, K)
    pairs = []
    for k in range(K + 1):
        v = states[j, k]
        if not _tails_ok(v):
            raise WindowTooSmall(
                f"psi_{{{j},{k}}} does not decay within the window "
                f"(edge/peak = {abs(v[0]) / np.abs(v).max():.2e}, "
                f"{abs(v[-1]) / np.abs(v).max():.2e})")
        i = int(np.argmax(np.abs(v)))
        if v[i] < 0:
            v = -v
        pairs.append(EigenPair(k, table[k], LatticeFunction(chain.window, v)))
    return pairs


def eigen_residual(L: TridiagonalOp, pair: EigenPair, edge: int = EDGE) -> float:
    """``||L psi - lambda psi||_2`` over sites ``edge`` away from the window ends."""
    r = L.matvec(pair.psi.values) - pair.lam * pair.psi.values
    return float(np.linalg.norm(r[L.window.interior(edge)]))


def gram_matrix(basis: Sequence[EigenPair]) -> np.ndarray:
    V = np.array([p.psi.values for p in basis])
    return V @ V.T


def completeness_defect(basis: Sequence[EigenPair], v: LatticeFunction) -> float:
    """``||v||^2 - sum_k <psi_k, v>^2``."""
    total = v.inner(v)
    for p in basis:
        total -= p.psi.inner(v) ** 2
    return float(total)
