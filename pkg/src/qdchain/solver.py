"""Numerical q-chains of general even period by damped Gauss-Newton.

Unknowns are the coefficients ``a_j(n)`` and ``log b_j(n)`` of ``A_1..A_r`` on
a window; ``A_0`` is the wrapped operator ``a_0(n) = a_r(n + s)``.  For every
``j`` and every site in a trimmed interior the factorization

    A_j A_j^+ - alpha_j = q A_{j-1}^+ A_{j-1}

contributes a diagonal and an off-diagonal equation.  The outermost sites
only enter as neighbours, so the system is underdetermined; Levenberg damping
keeps each step close to the current iterate along the free directions.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .chain_r2 import ChainParams, chain_operator
from .darboux import DarbouxChain
from .errors import NotConverged, ParameterError, SingularJacobian, WindowTooSmall
from .lattice import FirstOrderOp, LatticeWindow

log = logging.getLogger(__name__)


@dataclass
class ChainUnknowns:
    """Coefficients ``a[j-1, i]``, ``b[j-1, i]`` of ``A_j`` at window site ``i``."""

    window: LatticeWindow
    s: int
    a: np.ndarray
    b: np.ndarray

    def __post_init__(self):
        self.a = np.array(self.a, dtype=float)
        self.b = np.array(self.b, dtype=float)
        if self.a.shape != self.b.shape or self.a.ndim != 2:
            raise ParameterError("a and b must be arrays of equal shape (r, sites)")
        if self.a.shape[1] != self.window.size:
            raise ParameterError("coefficient arrays do not match the window")
        if not (np.all(np.isfinite(self.a)) and np.all(np.isfinite(self.b))):
            raise ParameterError("non-finite coefficients")
        if np.any(self.b <= 0):
            raise ParameterError("b must be positive")

    @property
    def r(self) -> int:
        return self.a.shape[0]

    def vector(self) -> np.ndarray:
        return np.concatenate([self.a.ravel(), np.log(self.b).ravel()])

    def with_vector(self, x: np.ndarray) -> "ChainUnknowns":
        half = x.size // 2
        return ChainUnknowns(self.window, self.s, x[:half].reshape(self.a.shape),
                             np.exp(x[half:]).reshape(self.b.shape))

    def operators(self) -> list:
        return [FirstOrderOp(self.window, self.a[j], self.b[j]) for j in range(self.r)]

    def wrapped(self):
        """Coefficients of ``A_0``; sites past the right edge repeat the last value."""
        s = self.s
        a0 = np.concatenate([self.a[-1, s:], np.repeat(self.a[-1, -1], s)])
        b0 = np.concatenate([self.b[-1, s:], np.repeat(self.b[-1, -1], s)])
        return a0, b0

    def chain(self, params: ChainParams) -> DarbouxChain:
        a0, b0 = self.wrapped()
        ops = (FirstOrderOp(self.window, a0, b0),) + tuple(self.operators())
        return DarbouxChain(params.q, params.alphas, self.s, ops)

    def negated(self) -> "ChainUnknowns":
        return ChainUnknowns(self.window, self.s, -self.a, self.b)


def residual_sites(window: LatticeWindow, s: int) -> np.ndarray:
    """Window indices where every equation has all its neighbours inside."""
    trim = s + 1
    return np.arange(trim, window.size - trim)


def _check_window(window: LatticeWindow, r: int) -> None:
    if window.size < 2 * r + 6:
        raise WindowTooSmall(f"window of {window.size} sites is below 2r + 6 = {2 * r + 6}")


def _layout(u: ChainUnknowns):
    """Index arithmetic shared by residual and Jacobian assembly.

    For chain step ``j`` (0-based ``jj``) the previous operator is row
    ``jj - 1`` evaluated at the same sites, except for ``jj = 0`` where it
    is row ``r - 1`` evaluated ``s`` sites to the right.
    """
    r, N, s = u.r, u.window.size, u.s
    idx = residual_sites(u.window, s)
    rows = []
    for jj in range(r):
        if jj == 0:
            prev, off = r - 1, s
        else:
            prev, off = jj - 1, 0
        rows.append((jj, prev, off))
    return r, N, idx, rows


def assemble_residuals(u: ChainUnknowns, params: ChainParams) -> np.ndarray:
    """Diagonal then off-diagonal defects for each ``j``, concatenated over ``j``."""
    _check_window(u.window, u.r)
    if u.r != params.r or u.s != params.s:
        raise ParameterError("unknowns and parameters disagree on r or s")
    r, N, idx, rows = _layout(u)
    a, b, q = u.a, u.b, params.q
    out = []
    for jj, prev, off in rows:
        p = idx + off
        diag = (a[jj, idx] ** 2 + b[jj, idx] ** 2 - params.alphas[jj]
                - q * (a[prev, p] ** 2 + b[prev, p - 1] ** 2))
        offd = a[jj, idx + 1] * b[jj, idx] - q * a[prev, p] * b[prev, p]
        out.extend([diag, offd])
    return np.concatenate(out)


def jacobian(u: ChainUnknowns, params: ChainParams) -> sp.csr_matrix:
    """Sparse Jacobian of :func:`assemble_residuals` in the ``(a, log b)`` variables."""
    r, N, idx, rows = _layout(u)
    a, b, q = u.a, u.b, params.q
    M = idx.size
    nb = r * N  # offset of the log-b block

    def A(j, i):
        return j * N + i

    def B(j, i):
        return nb + j * N + i

    R, C, V = [], [], []

    def put(row, col, val):
        R.append(row)
        C.append(col)
        V.append(val)

    for block, (jj, prev, off) in enumerate(rows):
        rd = 2 * block * M + np.arange(M)
        ro = rd + M
        p = idx + off
        put(rd, A(jj, idx), 2.0 * a[jj, idx])
        put(rd, B(jj, idx), 2.0 * b[jj, idx] ** 2)
        put(rd, A(prev, p), -2.0 * q * a[prev, p])
        put(rd, B(prev, p - 1), -2.0 * q * b[prev, p - 1] ** 2)
        put(ro, A(jj, idx + 1), b[jj, idx])
        put(ro, B(jj, idx), a[jj, idx + 1] * b[jj, idx])
        put(ro, A(prev, p), -q * b[prev, p])
        put(ro, B(prev, p), -q * a[prev, p] * b[prev, p])
    R, C, V = (np.concatenate(x) for x in (R, C, V))
    return sp.csr_matrix((V, (R, C)), shape=(2 * r * M, 2 * r * N))


@dataclass
class SolveReport:
    residual: float
    iterations: int
    converged: bool
    gauge_note: str
    history: list = field(default_factory=list)
    null_dim: Optional[int] = None

    def to_dict(self) -> dict:
        return {"residual": self.residual, "iterations": self.iterations,
                "converged": self.converged, "gauge_note": self.gauge_note,
                "null_dim": self.null_dim}


def _pin_mask(u: ChainUnknowns, pins: Sequence[tuple], hold_edges: int = 0) -> np.ndarray:
    """Free-variable mask: ``a_j(n)`` fixed for each ``(j, n)`` pin, and every
    coefficient fixed on the ``hold_edges`` outermost sites of each side."""
    N = u.window.size
    free = np.ones((2, u.r, N), dtype=bool)
    for j, n in pins:
        free[0, j - 1, u.window.index(n)] = False
    if hold_edges:
        free[:, :, :hold_edges] = False
        free[:, :, N - hold_edges:] = False
    return free.ravel()


def default_pins(u: ChainUnknowns) -> list:
    """One ``a_j`` per chain step at the window centre: the family coordinates."""
    centre = (u.window.n_min + u.window.n_max) // 2
    return [(j, centre) for j in range(1, u.r + 1)]


def solve(params: ChainParams, seed: ChainUnknowns, tol: float = 1e-10,
          max_iter: int = 100, pins: Sequence[tuple] = (), hold_edges: int = 0,
          mu0: float = 1e-3):
    """Levenberg-Marquardt on :func:`assemble_residuals` until the sup-norm is ``<= tol``.

    ``pins`` lists ``(j, n)`` sites whose ``a_j(n)`` keeps its seed value and
    ``hold_edges`` freezes that many outer sites per side.  Both default to
    nothing: the damping alone keeps the iterate near the seed along the
    solution family, and fixed values become infeasible once alpha or q
    move.  Pass :func:`default_pins` plus ``hold_edges = s + 1`` to recover
    one particular family member (the gauge used by the recovery tests).
    Returns ``(unknowns, report)``; raises :class:`NotConverged` when
    ``max_iter`` is exhausted.
    """
    if not tol > 0:
        raise ParameterError("tol must be positive")
    u = seed
    pins = list(pins)
    free = _pin_mask(u, pins, hold_edges)
    note = (f"pinned a_j(n) at (j, n) in {pins}; {hold_edges} edge sites held per side; "
            f"outer {u.s + 1} sites enter only as neighbours")
    res = assemble_residuals(u, params)
    cost = float(res @ res)
    history = [float(np.abs(res).max())]
    mu = mu0
    it = 0
    while history[-1] > tol:
        if it >= max_iter:
            raise NotConverged(
                f"residual {history[-1]:.3e} above {tol:.1e} after {max_iter} iterations")
        it += 1
        J = jacobian(u, params)[:, free]
        JT = J.T.tocsr()
        H = (JT @ J).tocsc()
        g = JT @ res
        # Marquardt scaling, floored: edge coefficients decay to ~1e-12
        scale = H.diagonal()
        scale = np.maximum(scale, 1e-10 * scale.max())
        accepted = False
        for _ in range(30):
            lhs = (H + mu * sp.diags(scale)).tocsc()
            try:
                step = spla.spsolve(lhs, -g)
            except RuntimeError as exc:  # singular factorization
                raise SingularJacobian(str(exc)) from exc
            if not np.all(np.isfinite(step)):
                mu *= 10.0
                continue
            x = u.vector()
            x[free] += step
            try:
                trial = u.with_vector(x)
            except ParameterError:
                mu *= 10.0
                continue
            tres = assemble_residuals(trial, params)
            tcost = float(tres @ tres)
            if tcost < cost:
                u, res, cost = trial, tres, tcost
                mu = max(mu / 10.0, 1e-15)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            raise SingularJacobian(
                f"no descent step found at residual {history[-1]:.3e} (mu = {mu:.1e})")
        history.append(float(np.abs(res).max()))
        log.debug("iteration %d: residual %.3e, mu %.1e", it, history[-1], mu)
    report = SolveReport(history[-1], it, True, note, history)
    return u, report


def null_space_dim(u: ChainUnknowns, params: ChainParams, rtol: float = 1e-9) -> int:
    """Dimension of the Jacobian kernel at ``u`` (dense SVD; diagnostic only)."""
    J = jacobian(u, params).toarray()
    sv = np.linalg.svd(J, compute_uv=False)
    rank = int(np.sum(sv > rtol * sv[0]))
    return J.shape[1] - rank


def r2_unknowns(params2: ChainParams, window: LatticeWindow, r: int) -> ChainUnknowns:
    """Closed-form ``A_1..A_r`` of an r = 2 chain, read as a period-r chain."""
    ops = [chain_operator(params2, window, j) for j in range(1, r + 1)]
    return ChainUnknowns(window, r // 2, np.array([A.a for A in ops]),
                         np.array([A.b for A in ops]))


def _interlace_params(params: ChainParams, q: float) -> ChainParams:
    odd = float(np.mean(params.alphas[0::2]))
    even = float(np.mean(params.alphas[1::2]))
    return ChainParams(r=2, s=1, q=q, alphas=(odd, even), phi=params.phi,
                       epsilon=params.epsilon)


def seed_chain(params: ChainParams, window: LatticeWindow,
               strategy: str = "from-r2-interlace", *, q_start: float = 0.99,
               steps: int = 10, tol: float = 1e-10, max_iter: int = 100) -> ChainUnknowns:
    """Initial guess for :func:`solve`.

    ``from-r2-interlace`` reads the closed-form r = 2 chain (alphas averaged
    over odd and even positions) as a period-r chain; since
    ``A_{j+2} = T^{-1} A_j T`` implies ``A_{j+r} = T^{-r/2} A_j T^{r/2}`` it is
    exact when those averages reproduce every alpha.
    ``continuation-in-q`` solves at ``q_start`` (where the chain is close to
    its continuum limit) and walks q to its target in ``steps`` solved
    increments.
    """
    _check_window(window, params.r)
    if strategy == "from-r2-interlace":
        return r2_unknowns(_interlace_params(params, params.q), window, params.r)
    if strategy == "continuation-in-q":
        path = continuation_path(params, window, q_start, steps, tol, max_iter)
        return path[-1][1]
    raise ParameterError(f"unknown seeding strategy {strategy!r}")


def alpha_homotopy(params: ChainParams, seed: ChainUnknowns, steps: int = 10,
                   tol: float = 1e-10, max_iter: int = 100):
    """Solve along ``alpha(tau) = mean + tau (alpha - mean)``, ``tau = 1/steps .. 1``.

    The interlaced seed is exact for equal alphas, so starting there and
    deforming toward the target keeps every step inside the basin.
    Returns ``(unknowns, report)`` of the final step.
    """
    target = np.asarray(params.alphas, dtype=float)
    mean = float(target.mean())
    if np.all(target == mean):
        return solve(params, seed, tol, max_iter)
    u, rep = seed, None
    for tau in np.linspace(0.0, 1.0, steps + 1)[1:]:
        alphas = tuple(float(x) for x in mean + tau * (target - mean))
        u, rep = solve(params.replace(alphas=alphas), u, tol, max_iter)
    return u, rep


def solve_chain(params: ChainParams, window: LatticeWindow, tol: float = 1e-10,
                max_iter: int = 100, alpha_steps: int = 10):
    """Interlaced seed at the mean alpha, then :func:`alpha_homotopy`."""
    mean = float(np.mean(params.alphas))
    seed = seed_chain(params.replace(alphas=(mean,) * params.r), window)
    return alpha_homotopy(params, seed, alpha_steps, tol, max_iter)


def continuation_path(params: ChainParams, window: LatticeWindow, q_start: float = 0.99,
                      steps: int = 10, tol: float = 1e-10, max_iter: int = 100,
                      alpha_steps: int = 10) -> list:
    """Solved chains ``[(q, unknowns, report), ...]`` from ``q_start`` to ``params.q``.

    Between steps the previous solution is rescaled by
    ``sqrt((1 - q_prev) / (1 - q_next))``, the leading-order growth of the
    coefficients as q approaches 1.
    """
    if not 0 < q_start < 1:
        raise ParameterError("q_start must lie in (0, 1)")
    qs = np.linspace(q_start, params.q, steps + 1)
    u, rep = solve_chain(params.replace(q=float(qs[0])), window, tol, max_iter, alpha_steps)
    path = [(float(qs[0]), u, rep)]
    for q_prev, q in zip(qs[:-1], qs[1:]):
        f = math.sqrt((1.0 - q_prev) / (1.0 - q))
        u = ChainUnknowns(window, u.s, f * u.a, f * u.b)
        u, rep = solve(params.replace(q=float(q)), u, tol, max_iter)
        path.append((float(q), u, rep))
    return path


def gauge_align(u: ChainUnknowns, ref: ChainUnknowns) -> ChainUnknowns:
    """Flip the overall sign of the ``a`` sequences to best match ``ref``."""
    if np.sum(u.a * ref.a) < 0:
        return u.negated()
    return u


def chain_profiles(u: ChainUnknowns, params: ChainParams, h: float, grid) -> np.ndarray:
    """Potential profiles ``V_j(x)`` of ``L_j = A_j A_j^+ - alpha_j`` on ``grid``.

    ``V_j(n)`` is the row sum ``d(n) + u(n) + u(n-1)``, i.e. ``L_j`` applied to
    the constant function, which removes the ``2/h^2`` kinetic part.  Site
    ``n`` of ``L_j`` sits at ``x = (n + (2 - j)/2) h`` so that
    ``L_{j+2} = T^{-1} L_j T`` maps onto the same curve.  Returns an
    ``(r, len(grid))`` array, interpolated linearly on the trimmed interior.
    """
    grid = np.asarray(grid, dtype=float)
    n = u.window.sites.astype(float)
    idx = residual_sites(u.window, u.s)
    out = np.empty((u.r, grid.size))
    for jj in range(u.r):
        j = jj + 1
        a, b = u.a[jj], u.b[jj]
        d = a**2 + b**2 - params.alphas[jj]
        off = a[1:] * b[:-1]
        row = d[idx] + off[idx] + off[idx - 1]
        x = (n[idx] + (2 - j) / 2.0) * h
        if grid.min() < x[0] or grid.max() > x[-1]:
            raise WindowTooSmall(f"profile grid leaves the solved interval [{x[0]}, {x[-1]}]")
        out[jj] = np.interp(grid, x, row)
    return out


@dataclass
class ExperimentStep:
    h: float
    q: float
    residual: float
    iterations: int
    spectral_diff: float
    period3_defect: float
    profiles: np.ndarray
    null_dim: Optional[int] = None


@dataclass
class ExperimentReport:
    alphas: tuple
    grid: np.ndarray
    steps: list
    profile_diffs: list

    @property
    def monotone(self) -> bool:
        d = self.profile_diffs
        return all(d[i + 1] < d[i] for i in range(len(d) - 1))

    def to_dict(self) -> dict:
        return {
            "alphas": list(self.alphas),
            "steps": [{"h": st.h, "q": st.q, "residual": st.residual,
                       "iterations": st.iterations, "spectral_diff": st.spectral_diff,
                       "period3_defect": st.period3_defect, "null_dim": st.null_dim}
                      for st in self.steps],
            "profile_diffs": list(self.profile_diffs),
            "monotone": self.monotone,
        }

    def profile_rows(self) -> list:
        """``(h, j, x, V)`` rows for CSV output."""
        rows = []
        for st in self.steps:
            for jj in range(st.profiles.shape[0]):
                for x, v in zip(self.grid, st.profiles[jj]):
                    rows.append((st.h, jj + 1, float(x), float(v)))
        return rows


def period6_experiment(alphas3: Sequence[float], h_list: Sequence[float],
                       x_max: float = 2.0, points: int = 41, half_width: float = 10.0,
                       levels: int = 5, tol: float = 1e-10, with_null_dim: bool = False
                       ) -> ExperimentReport:
    """Solve the r = 6 q-chain with ``alpha_{j+3} = alpha_j`` for each step ``h``.

    ``q`` follows the continuum scaling with the mean alpha and the window
    covers ``|x| <= half_width``.  Per step the report holds the solver
    residual, the worst Darboux-vs-oracle level difference over all six
    ``L_j``, the period-3 defect ``max |V_j - V_{j+3}|`` and the profiles;
    ``profile_diffs[i]`` is the sup distance between the profiles at
    ``h_list[i]`` and ``h_list[i + 1]``.
    """
    from .continuum import q_of_h
    from .darboux import eigenvalue_table
    from .lattice import LatticeWindow as Window
    from .tridiag import compare_spectra, oracle_spectrum

    if len(alphas3) != 3:
        raise ParameterError("need three alphas")
    alphas = tuple(float(a) for a in alphas3) * 2
    grid = np.linspace(-x_max, x_max, points)
    steps = []
    for h in h_list:
        q = q_of_h(float(np.mean(alphas)), h)
        params = ChainParams(r=6, s=3, q=q, alphas=alphas, phi=0.0, epsilon=-1)
        N = int(math.ceil(half_width / h))
        window = Window(-N, N)
        u, rep = solve_chain(params, window, tol)
        chain = u.chain(params)
        worst = 0.0
        for j in range(1, 7):
            pred = eigenvalue_table(params, j, levels - 1)
            orc = oracle_spectrum(chain.L(j), levels)
            worst = max(worst, compare_spectra(pred, orc).max_abs_diff)
        prof = chain_profiles(u, params, h, grid)
        defect = float(np.abs(prof[:3] - prof[3:]).max())
        nd = null_space_dim(u, params) if with_null_dim else None
        steps.append(ExperimentStep(h, q, rep.residual, rep.iterations, worst, defect,
                                    prof, nd))
    diffs = [float(np.abs(a.profiles - b.profiles).max()) for a, b in zip(steps, steps[1:])]
    return ExperimentReport(alphas, grid, steps, diffs)


def impose_gauge(u: ChainUnknowns, ref: ChainUnknowns, hold_edges: Optional[int] = None):
    """Copy the family coordinates of ``ref`` into ``u``.

    ``a_j`` at the window centre and all coefficients on ``hold_edges``
    (default ``s + 1``) outer sites per side are taken from ``ref``.  Returns
    ``(unknowns, pins, hold_edges)`` ready to pass to :func:`solve`, which
    then converges to the member of the family selected by ``ref``.
    """
    hold = u.s + 1 if hold_edges is None else hold_edges
    a, b = u.a.copy(), u.b.copy()
    pins = default_pins(u)
    for j, n in pins:
        a[j - 1, u.window.index(n)] = ref.a[j - 1, ref.window.index(n)]
    if hold:
        a[:, :hold], b[:, :hold] = ref.a[:, :hold], ref.b[:, :hold]
        a[:, -hold:], b[:, -hold:] = ref.a[:, -hold:], ref.b[:, -hold:]
    return ChainUnknowns(u.window, u.s, a, b), pins, hold
