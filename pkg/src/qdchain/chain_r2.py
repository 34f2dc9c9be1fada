"""Closed-form period-2, shift-1 q-chains.

For ``r = 2 = 2s`` the chain coefficients are square roots of two lattice
sequences ``xi_t`` and ``eta_t``.  With ``w = q**(t + phi)``::

    xi_t  = 1/2 (c_t - 2 kappa q^{-t-phi-1/2} + c_{t+1} q^{-2t-2phi-1})
            / ((1 - q^{-2(t+phi)}) (1 - q^{-2(t+phi+1)}))
    eta_t = 1/2 (c_{t+1} - 2 kappa q^{t+phi+1/2} + c_t q^{2t+2phi+1})
            / ((1 - w^2) (1 - q^2 w^2))

and ``c_t = (alpha1 + alpha2)/(1 - q) + (-1)^t (alpha1 - alpha2)/(1 + q)``.
The operator ``A_j`` of the chain has

    a_j(n) = epsilon sqrt(xi_{2n+1-j}),   b_j(n) = sqrt(eta_{2n+2-j}),

which reproduces ``A_1, A_2`` and continues periodically with
``A_{j+2} = T^{-1} A_j T``.

When ``phi`` is an integer, kappa is pinned and both numerators vanish at the
poles ``t = -phi`` and ``t = -phi - 1``; the removable factor is divided out
analytically (see :func:`_eta_pinned`).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import KappaOutOfRange, NegativeCoefficient, ParameterError, PoleError
from .lattice import (
    FirstOrderOp,
    LatticeWindow,
    TridiagonalOp,
    chain_residual,
    entry_differences,
    lower_product,
    shift_conjugate,
)

#: relative slack when deciding whether kappa sits on the pinned value
PIN_RTOL = 1e-12
#: exponents closer than this to a pole are treated as hitting it
POLE_ATOL = 1e-12


@dataclass(frozen=True)
class ChainParams:
    """Parameters of a periodic q-chain with even period ``r`` and shift ``r/2``.

    ``phi``, ``kappa`` and ``epsilon`` only matter for the closed-form
    ``r = 2`` family.  A missing ``kappa`` defaults to the midpoint of the
    admissible window, or to the pinned value when ``phi`` is an integer.
    """

    r: int
    s: int
    q: float
    alphas: tuple
    phi: float = 0.5
    kappa: Optional[float] = None
    epsilon: int = -1

    def __post_init__(self):
        alphas = tuple(float(a) for a in self.alphas)
        object.__setattr__(self, "alphas", alphas)
        if int(self.r) != self.r or self.r <= 0 or self.r % 2:
            raise ParameterError(f"r must be a positive even integer, got {self.r}")
        if self.s != self.r // 2:
            raise ParameterError(f"shift s must equal r/2 = {self.r // 2}, got {self.s}")
        object.__setattr__(self, "r", int(self.r))
        object.__setattr__(self, "s", int(self.s))
        if not 0.0 < self.q < 1.0:
            raise ParameterError(f"q must lie in (0, 1), got {self.q}")
        if len(alphas) != self.r:
            raise ParameterError(f"expected {self.r} alpha values, got {len(alphas)}")
        if not all(math.isfinite(a) and a > 0 for a in alphas):
            raise ParameterError(f"all alpha values must be positive, got {list(alphas)}")
        if self.epsilon not in (1, -1):
            raise ParameterError(f"epsilon must be +1 or -1, got {self.epsilon}")
        if not math.isfinite(self.phi):
            raise ParameterError("phi must be finite")
        if self.kappa is None:
            if self.r == 2:
                object.__setattr__(self, "kappa", kappa_constraint(self).default_kappa)
        elif not math.isfinite(self.kappa):
            raise ParameterError("kappa must be finite")

    def alpha(self, j: int) -> float:
        """``alpha_j`` with periodic indexing ``alpha_{j+r} = alpha_j``."""
        return self.alphas[(j - 1) % self.r]

    @property
    def floor_phi(self) -> int:
        return math.floor(self.phi)

    @property
    def theta(self) -> float:
        return self.phi - self.floor_phi - 0.5

    @property
    def phi_is_integer(self) -> bool:
        return float(self.phi).is_integer()

    def replace(self, **changes) -> "ChainParams":
        fields = dict(r=self.r, s=self.s, q=self.q, alphas=self.alphas, phi=self.phi,
                      kappa=self.kappa, epsilon=self.epsilon)
        if "kappa" not in changes and {"q", "alphas", "phi"} & changes.keys():
            fields["kappa"] = None
        fields.update(changes)
        return ChainParams(**fields)


@dataclass(frozen=True)
class KappaConstraint:
    """Admissible values of ``2 kappa``: an open interval or a pinned point."""

    kind: str
    lo: float
    hi: float
    pinned: Optional[float] = None

    @property
    def default_kappa(self) -> float:
        if self.kind == "pinned-point":
            return self.pinned / 2.0
        return (self.lo + self.hi) / 4.0

    def check(self, kappa: float) -> None:
        """Raise :class:`KappaOutOfRange` naming the violated bound."""
        two_k = 2.0 * kappa
        if self.kind == "pinned-point":
            if not math.isclose(two_k, self.pinned, rel_tol=PIN_RTOL, abs_tol=0.0):
                raise KappaOutOfRange(
                    f"integer phi pins 2*kappa = {self.pinned!r}, got {two_k!r}", "pinned")
            return
        if not two_k > self.lo:
            raise KappaOutOfRange(
                f"2*kappa = {two_k!r} is not above the lower bound {self.lo!r}", "lower")
        if not two_k < self.hi:
            raise KappaOutOfRange(
                f"2*kappa = {two_k!r} is not below the upper bound {self.hi!r}", "upper")


def _parity_sign(n) -> np.ndarray:
    n = np.asarray(n, dtype=float)
    integral = np.floor(n) == n
    exact = np.where(np.mod(n, 2.0) == 0.0, 1.0, -1.0)
    return np.where(integral, exact, np.cos(np.pi * n))


def c_coeff(n, alpha1: float, alpha2: float, q: float):
    """``c_n``; for non-integer ``n`` the sign ``(-1)^n`` is read as ``cos(pi n)``."""
    val = (alpha1 + alpha2) / (1.0 - q) + _parity_sign(n) * (alpha1 - alpha2) / (1.0 + q)
    return float(val) if np.ndim(val) == 0 else val


def kappa_constraint(params: ChainParams) -> KappaConstraint:
    if params.r != 2:
        raise ParameterError("the kappa window is only defined for r = 2")
    a1, a2 = params.alphas
    q = params.q
    if params.phi_is_integer:
        m = int(params.phi)
        pinned = c_coeff(m, a1, a2, q) * math.sqrt(q) + c_coeff(m - 1, a1, a2, q) / math.sqrt(q)
        return KappaConstraint("pinned-point", pinned, pinned, pinned)
    m = params.floor_phi
    th = params.theta
    c0 = c_coeff(m, a1, a2, q)
    c1 = c_coeff(m - 1, a1, a2, q)
    lo = c0 * q**-th + c1 * q**th
    hi = min(c0 * q**(th + 1) + c1 * q**(-th - 1), c0 * q**(th - 1) + c1 * q**(-th + 1))
    return KappaConstraint("open-interval", lo, hi)


def check_kappa(params: ChainParams) -> KappaConstraint:
    con = kappa_constraint(params)
    con.check(params.kappa)
    return con


def _is_pinned(params: ChainParams) -> bool:
    if not params.phi_is_integer:
        return False
    pinned = kappa_constraint(params).pinned
    return math.isclose(2.0 * params.kappa, pinned, rel_tol=PIN_RTOL, abs_tol=0.0)


def _parity_class(parity, phi: int) -> np.ndarray:
    par = np.asarray(parity, dtype=float)
    if np.any(np.floor(par) != par):
        raise ParameterError("the integer-phi branch needs an integer parity carrier")
    return np.mod(par - phi, 2.0) == 0.0


def _split(t, params: ChainParams):
    """``w = q^(t+phi)`` on sites where ``w <= 1`` and ``u = 1/w`` elsewhere.

    Every formula below is written in whichever of ``w``, ``u`` is at most 1,
    so large ``|t|`` underflows gracefully instead of overflowing.
    """
    e = np.atleast_1d(np.asarray(t, dtype=float)) + params.phi
    lnq = math.log(params.q)
    small = e >= 0.0
    w = np.exp(np.where(small, e * lnq, 0.0))
    u = np.exp(np.where(small, 0.0, -e * lnq))
    return e, small, w, u


def _generic(t, parity, params: ChainParams):
    """``(eta_t, xi_t)`` for the generic branch.

    Both numerators reduce to ``P(w) = c_{t+1} - 2 kappa sqrt(q) w + c_t q w^2``
    over ``(1 - w^2)(1 - q^2 w^2)``, which gives ``xi_t = q w^2 eta_t``.
    """
    q, k = params.q, params.kappa
    ct, ct1 = (np.broadcast_to(c, np.shape(np.atleast_1d(t))) for c in _c_pair(t, parity, params))
    e, small, w, u = _split(t, params)
    sq = math.sqrt(q)
    eta_v = np.empty_like(e)
    xi_v = np.empty_like(e)
    s, b = small, ~small
    ws = w[s]
    den = (1.0 - ws * ws) * (1.0 - (q * ws) ** 2)
    eta_v[s] = 0.5 * (ct1[s] - 2.0 * k * sq * ws + ct[s] * q * ws * ws) / den
    xi_v[s] = q * ws * ws * eta_v[s]
    ub = u[b]
    pu = ct1[b] * ub * ub - 2.0 * k * sq * ub + ct[b] * q
    den = (ub * ub - 1.0) * (ub * ub - q * q)
    eta_v[b] = 0.5 * ub * ub * pu / den
    xi_v[b] = 0.5 * q * pu / den
    return eta_v, xi_v


def _pinned(t, parity, params: ChainParams):
    """``(eta_t, xi_t)`` for integer phi with kappa pinned, removable factor divided out.

    With ``C0 = c_phi``, ``C1 = c_{phi-1}`` the numerator factors as
    ``(w - 1)(C0 q w - C1)`` when ``t = phi (mod 2)`` and as
    ``(q w - 1)(C1 w - C0)`` otherwise.  After cancelling, each class keeps
    a regular part plus a part proportional to ``C1 - C0`` that still has a
    pole at real ``t`` (never at lattice sites of its class).
    """
    a1, a2 = params.alphas
    q = params.q
    m = int(params.phi)
    c0 = c_coeff(m, a1, a2, q)
    c1 = c_coeff(m - 1, a1, a2, q)
    e, small, w, u = _split(t, params)
    same = np.broadcast_to(_parity_class(parity, m), e.shape)
    gap = c1 - c0
    if gap != 0.0:
        # pole of the singular part: t = -phi - 1 (same class) or t = -phi (other class)
        pole = np.where(same, e + 1.0, e)
        if np.any(np.abs(pole) < POLE_ATOL):
            raise PoleError(f"eta has a pole at t = {(e - m)[np.abs(pole) < POLE_ATOL]}")
    reg_c = np.where(same, c0, c1)
    sing_c = np.where(same, gap, -gap)
    eta_v = np.empty_like(e)
    xi_v = np.empty_like(e)
    s, b = small, ~small
    ws = w[s]
    val = reg_c[s] / ((1.0 + ws) * (1.0 + q * ws))
    if gap != 0.0:
        den = np.where(same[s], (1.0 + ws) * (1.0 - (q * ws) ** 2),
                       (1.0 - ws * ws) * (1.0 + q * ws))
        val = val + sing_c[s] / den
    eta_v[s] = 0.5 * val
    xi_v[s] = q * ws * ws * eta_v[s]
    # w > 1: (1+w)(1+qw) = w^2 (1+u)(u+q), the singular denominators carry w^3
    ub = u[b]
    reg = reg_c[b] / ((1.0 + ub) * (ub + q))
    sing = 0.0
    if gap != 0.0:
        den = np.where(same[b], (1.0 + ub) * (ub * ub - q * q), (ub * ub - 1.0) * (ub + q))
        sing = sing_c[b] * ub / den
    eta_v[b] = 0.5 * ub * ub * (reg + sing)
    xi_v[b] = 0.5 * q * (reg + sing)
    return eta_v, xi_v


def _check_generic_poles(t, params: ChainParams, name: str) -> None:
    e = np.asarray(t, dtype=float) + params.phi
    hit = (np.abs(e) < POLE_ATOL) | (np.abs(e + 1.0) < POLE_ATOL)
    if np.any(hit):
        raise PoleError(
            f"{name}_t has a non-removable pole at t = {np.asarray(t, dtype=float)[hit]} "
            f"(phi = {params.phi}, kappa = {params.kappa})"
        )


def _c_pair(t, parity, params: ChainParams):
    a1, a2 = params.alphas
    p = t if parity is None else parity
    return c_coeff(p, a1, a2, params.q), c_coeff(np.asarray(p, dtype=float) + 1.0, a1, a2, params.q)


def _eta_xi(t, params: ChainParams, parity, name: str):
    if params.r != 2:
        raise ParameterError("closed-form coefficients exist only for r = 2")
    if _is_pinned(params):
        return _pinned(t, t if parity is None else parity, params)
    _check_generic_poles(t, params, name)
    return _generic(t, parity, params)


def _out(vals, t):
    return float(vals[0]) if np.ndim(t) == 0 else vals.reshape(np.shape(t))


def eta(t, params: ChainParams, parity=None):
    """``eta_t``; ``parity`` overrides the index used for the sign ``(-1)^t``."""
    return _out(_eta_xi(t, params, parity, "eta")[0], t)


def xi(t, params: ChainParams, parity=None):
    """``xi_t``; ``parity`` overrides the index used for the sign ``(-1)^t``."""
    return _out(_eta_xi(t, params, parity, "xi")[1], t)


def _radicands(params: ChainParams, window: LatticeWindow, j: int):
    n = window.sites.astype(float)
    ta = 2.0 * n + 1.0 - j
    tb = 2.0 * n + 2.0 - j
    return ta, np.asarray(xi(ta, params)), tb, np.asarray(eta(tb, params))


def chain_operator(params: ChainParams, window: LatticeWindow, j: int) -> FirstOrderOp:
    """``A_j`` for any integer ``j``: ``a_j(n) = eps sqrt(xi_{2n+1-j})``, ``b_j(n) = sqrt(eta_{2n+2-j})``."""
    ta, x, tb, y = _radicands(params, window, j)
    _require_positive(window, x, ta, "xi")
    _require_positive(window, y, tb, "eta")
    return FirstOrderOp(window, params.epsilon * np.sqrt(x), np.sqrt(y))


def _require_positive(window, vals, t, which):
    if np.all(vals > 0):
        return
    i = int(np.argmin(vals))
    n = int(window.sites[i])
    raise NegativeCoefficient(
        f"radicand {which}_{int(t[i])} = {vals[i]!r} at site n = {n} is not positive; "
        "kappa lies outside the admissible window or a pole was hit",
        site=n, which=f"{which}_{int(t[i])}", value=float(vals[i]),
    )


def build_pair(params: ChainParams, window: LatticeWindow):
    """Return ``(A1, A2, A0)`` on ``window`` with ``A0 = T A2 T^{-1}``."""
    if params.r != 2:
        raise ParameterError("build_pair requires r = 2")
    return tuple(chain_operator(params, window, j) for j in (1, 2, 0))


def chain_L(params: ChainParams, window: LatticeWindow, j: int) -> TridiagonalOp:
    """``L_j = A_j A_j^+ - alpha_j`` assembled from the closed-form coefficients."""
    return lower_product(chain_operator(params, window, j)).scaled(1.0, -params.alpha(j))


@dataclass
class ValidationReport:
    kappa: float
    kappa_kind: str
    two_kappa_lo: float
    two_kappa_hi: float
    min_radicand: float
    min_radicand_at: str
    eq2_j1: float
    eq2_j2: float
    eq3: float
    extra: dict = field(default_factory=dict)

    @property
    def max_residual(self) -> float:
        return max(self.eq2_j1, self.eq2_j2, self.eq3)

    def to_dict(self) -> dict:
        return {
            "kappa": {"value": self.kappa, "kind": self.kappa_kind,
                      "lo": self.two_kappa_lo, "hi": self.two_kappa_hi},
            "min_radicand": {"value": self.min_radicand, "at": self.min_radicand_at},
            "residuals": {"eq2_j1": self.eq2_j1, "eq2_j2": self.eq2_j2, "eq3": self.eq3},
        }


def periodicity_residual(params: ChainParams, window: LatticeWindow) -> float:
    """Max defect of ``L_{j+2} = T^{-1} L_j T`` for j = 1, 2 on the valid interior.

    ``L_j`` is taken as ``A_j A_j^+ - alpha_j`` and ``L_{j+2}`` as
    ``q A_{j+1}^+ A_{j+1}``, so the check also exercises the factorization.
    """
    from .lattice import raise_product

    worst = 0.0
    for j in (1, 2):
        shifted = shift_conjugate(chain_L(params, window, j), params.s)
        upper = raise_product(chain_operator(params, window, j + 1)).scaled(params.q)
        dd, du = entry_differences(shifted, upper)
        worst = max(worst, dd.max(initial=0.0), du.max(initial=0.0))
    return float(worst)


def min_radicand(params: ChainParams, window: LatticeWindow) -> tuple:
    """``(value, label, site)`` of the smallest xi/eta radicand used by ``A_0, A_1, A_2``.

    The kappa window is not checked, so this locates the failure for
    inadmissible kappa too.
    """
    lowest = (math.inf, "", 0)
    for j in (0, 1, 2):
        ta, x, tb, y = _radicands(params, window, j)
        for vals, t, name in ((x, ta, "xi"), (y, tb, "eta")):
            i = int(np.argmin(vals))
            if vals[i] < lowest[0]:
                lowest = (float(vals[i]), f"{name}_{int(t[i])}", int(window.sites[i]))
    return lowest


def validate(params: ChainParams, window: LatticeWindow) -> ValidationReport:
    """Kappa status, positivity scan and identity residuals for an r = 2 chain.

    Raises :class:`KappaOutOfRange` or :class:`NegativeCoefficient` when the
    parameters do not define a chain on ``window``.
    """
    try:
        con = check_kappa(params)
    except KappaOutOfRange as exc:
        try:
            exc.radicand = min_radicand(params, window)
        except PoleError:
            pass  # a pole on the lattice: nothing to locate
        raise
    lowest = min_radicand(params, window)
    A1, A2, A0 = build_pair(params, window)
    return ValidationReport(
        kappa=params.kappa,
        kappa_kind=con.kind,
        two_kappa_lo=con.lo,
        two_kappa_hi=con.hi,
        min_radicand=lowest[0],
        min_radicand_at=f"{lowest[1]} (n = {lowest[2]})",
        eq2_j1=chain_residual(A1, A0, params.alpha(1), params.q),
        eq2_j2=chain_residual(A2, A1, params.alpha(2), params.q),
        eq3=periodicity_residual(params, window),
    )
