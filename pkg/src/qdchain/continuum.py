"""q -> 1 continuum limit of the period-2 chain.

With ``phi = 0``, ``epsilon = -1`` and ``q = exp(-(alpha/4) h^2)`` the lattice
index becomes a real variable ``n = x/h`` and ``T`` the shift ``f(x) -> f(x+h)``.
The chain operators then approach Schrodinger operators:

    L_j + alpha/2  ->  -d^2/dx^2 + alpha^2 x^2 / 4                  (alpha_1 = alpha_2)
    L_j            ->  -d^2/dx^2 + (alpha_j + alpha_{j+1})^2 x^2 / 16 - alpha_j / 2
                       - (alpha_j - alpha_{j+1})(alpha_j + 3 alpha_{j+1})
                         / (4 (alpha_j + alpha_{j+1})^2 x^2)

Two conventions are fixed here and checked by the tests:

* ``alpha`` in ``q`` is the mean of ``alpha_1, alpha_2`` (it is ``alpha_1``
  when the two agree); only this choice reproduces the ``x^2`` coefficient
  above when they differ.
* The shift ``L_{j+2} = T^{-1} L_j T`` spreads one lattice step over two
  chain steps, so ``L_1`` sits half a site away from ``L_2``.  With
  ``centered=True`` the lattice site of ``L_1`` nearest to ``x`` is
  ``n = x/h - 1/2``; ``centered=False`` uses ``n = x/h`` for both and leaves
  an O(h) error in ``L_1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .chain_r2 import ChainParams, c_coeff, eta, xi
from .errors import NegativeCoefficient, ParameterError, PoleProximity, SingularAtZero

#: minimal distance, in units of the lattice index t, to a pole of xi/eta
POLE_GUARD = 1e-6


def q_of_h(alpha1: float, h: float) -> float:
    if not alpha1 > 0:
        raise ParameterError("alpha must be positive")
    if h < 0:
        raise ParameterError("h must be nonnegative")
    return math.exp(-(alpha1 / 4.0) * h * h)


@dataclass(frozen=True)
class LimitConfig:
    alphas: tuple
    h: float
    grid: tuple = field(default=())
    j: int = 1
    centered: bool = True

    def __post_init__(self):
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "grid", tuple(float(x) for x in self.grid))
        if len(self.alphas) != 2 or min(self.alphas) <= 0:
            raise ParameterError("the continuum limit needs two positive alphas")
        if not self.h > 0:
            raise ParameterError("h must be positive")
        if self.j not in (1, 2):
            raise ParameterError("j must be 1 or 2")

    @property
    def symmetric(self) -> bool:
        return self.alphas[0] == self.alphas[1]

    @property
    def q(self) -> float:
        return q_of_h(0.5 * (self.alphas[0] + self.alphas[1]), self.h)

    @property
    def alpha_j(self) -> float:
        return self.alphas[self.j - 1]

    def chain_params(self) -> ChainParams:
        return ChainParams(r=2, s=1, q=self.q, alphas=self.alphas, phi=0.0, epsilon=-1)

    @property
    def offset(self) -> float:
        """Position of lattice site 0 of ``L_j``, in units of h."""
        return 0.5 if (self.j == 1 and self.centered) else 0.0


def _guard_poles(t: np.ndarray, parity: int, params: ChainParams) -> None:
    a1, a2 = params.alphas
    if c_coeff(0, a1, a2, params.q) == c_coeff(1, a1, a2, params.q):
        return  # both factors cancel; no poles remain
    pole = -1.0 if parity % 2 == 0 else 0.0
    near = np.abs(t - pole) < POLE_GUARD
    if np.any(near):
        raise PoleProximity(f"lattice argument t = {t[near]} is within {POLE_GUARD} of "
                            f"the pole t = {pole}")


def _coeffs(cfg: LimitConfig, params: ChainParams, n):
    """``a_j(n), b_j(n)`` for real ``n`` with the parity fixed by the chain index."""
    j = cfg.j
    ta = 2.0 * n + 1.0 - j
    tb = 2.0 * n + 2.0 - j
    _guard_poles(ta, 1 - j, params)
    _guard_poles(tb, 2 - j, params)
    x2 = np.asarray(xi(ta, params, parity=1 - j))
    y2 = np.asarray(eta(tb, params, parity=2 - j))
    for vals, t, name in ((x2, ta, "xi"), (y2, tb, "eta")):
        if np.any(vals <= 0):
            i = int(np.argmin(vals))
            raise NegativeCoefficient(f"{name} = {vals.flat[i]!r} at real index "
                                      f"{np.ravel(t)[i]}", site=int(np.floor(np.ravel(n)[i])),
                                      which=name, value=float(vals.flat[i]))
    return params.epsilon * np.sqrt(x2), np.sqrt(y2)


def discrete_apply(cfg: LimitConfig, f: Callable, x):
    """``(L_j f)(x)``, plus ``alpha_1/2 f(x)`` in the symmetric case.

    ``L_j = A_j A_j^+ - alpha_j`` acts as
    ``(a(n)^2 + b(n)^2 - alpha_j) f(x) + a(n) b(n-1) f(x-h) + a(n+1) b(n) f(x+h)``
    with ``n = x/h - offset``.
    """
    params = cfg.chain_params()
    x = np.asarray(x, dtype=float)
    h = cfg.h
    n = x / h - cfg.offset
    a0, b0 = _coeffs(cfg, params, n)
    a1, _ = _coeffs(cfg, params, n + 1.0)
    _, bm = _coeffs(cfg, params, n - 1.0)
    out = (a0**2 + b0**2 - cfg.alpha_j) * f(x) + a0 * bm * f(x - h) + a1 * b0 * f(x + h)
    if cfg.symmetric:
        out = out + 0.5 * cfg.alphas[0] * f(x)
    return float(out) if out.ndim == 0 else out


def continuum_target(alphas: Sequence[float], j: int, x, f: Callable, f2: Callable):
    """Limit operator applied to ``f`` at ``x``; ``f2`` is the second derivative."""
    a1, a2 = (float(a) for a in alphas)
    x = np.asarray(x, dtype=float)
    if a1 == a2:
        out = -f2(x) + 0.25 * a1 * a1 * x * x * f(x)
    else:
        aj, ak = (a1, a2) if j == 1 else (a2, a1)
        if np.any(x == 0):
            raise SingularAtZero("the asymmetric limit operator is singular at x = 0")
        inv = (aj - ak) * (aj + 3.0 * ak) / (4.0 * (aj + ak) ** 2)
        out = (-f2(x) + (aj + ak) ** 2 / 16.0 * x * x * f(x) - 0.5 * aj * f(x)
               - inv / (x * x) * f(x))
    return float(out) if out.ndim == 0 else out


def limit_error(cfg: LimitConfig, f: Callable, f2: Callable) -> float:
    """Sup over ``cfg.grid`` of ``|discrete_apply - continuum_target|``."""
    grid = np.asarray(cfg.grid, dtype=float)
    if grid.size == 0:
        raise ParameterError("empty grid")
    diff = discrete_apply(cfg, f, grid) - continuum_target(cfg.alphas, cfg.j, grid, f, f2)
    return float(np.max(np.abs(diff)))


def h_sweep(alphas, hs: Sequence[float], grid, f: Callable, f2: Callable, j: int = 1,
            centered: bool = True) -> list:
    """Rows ``(h, q, error, error/h)`` for a decreasing list of steps."""
    rows = []
    for h in hs:
        cfg = LimitConfig(tuple(alphas), h, tuple(grid), j, centered)
        err = limit_error(cfg, f, f2)
        rows.append((h, cfg.q, err, err / h))
    return rows


#: closed-form test functions with their second derivatives
TEST_FUNCTIONS = {
    "gauss": (lambda x: np.exp(-x * x), lambda x: (4.0 * x * x - 2.0) * np.exp(-x * x)),
    "x_gauss": (lambda x: x * np.exp(-x * x),
                lambda x: (4.0 * x**3 - 6.0 * x) * np.exp(-x * x)),
    "cos_gauss": (lambda x: np.cos(x) * np.exp(-0.5 * x * x),
                  lambda x: np.exp(-0.5 * x * x)
                  * ((x * x - 2.0) * np.cos(x) + 2.0 * x * np.sin(x))),
}
