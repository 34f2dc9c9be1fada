import math

import numpy as np
import pytest
import sympy as sp

from qdchain import ChainParams, LatticeWindow, build_pair, c_coeff, eta, kappa_constraint, validate, xi
from qdchain.chain_r2 import min_radicand
from qdchain.errors import KappaOutOfRange, NegativeCoefficient, ParameterError


# -- exact reference formulas ------------------------------------------------

def c_exact(n, a1, a2, q):
    return (a1 + a2) / (1 - q) + (-1) ** n * (a1 - a2) / (1 + q)


def xi_eta_exact(t, a1, a2, q, phi, kappa):
    """Rational-arithmetic xi_t, eta_t from the closed form (phi rational, q rational)."""
    x = sp.Symbol("x", positive=True)  # stands for q**phi
    c0, c1 = c_exact(t, a1, a2, q), c_exact(t + 1, a1, a2, q)
    sq = sp.sqrt(q)
    xi_e = sp.Rational(1, 2) * (c0 - 2 * kappa / (q**t * x * sq) + c1 / (q ** (2 * t + 1) * x**2)) / (
        (1 - 1 / (q ** (2 * t) * x**2)) * (1 - 1 / (q ** (2 * t + 2) * x**2)))
    eta_e = sp.Rational(1, 2) * (c1 - 2 * kappa * q**t * x * sq + c0 * q ** (2 * t + 1) * x**2) / (
        (1 - q ** (2 * t) * x**2) * (1 - q ** (2 * t + 2) * x**2))
    return xi_e, eta_e, x


def exact_value(t, a1, a2, q, phi, kappa):
    xi_e, eta_e, x = xi_eta_exact(t, a1, a2, q, phi, kappa)
    val = q**phi
    return sp.nsimplify(xi_e.subs(x, val)), sp.nsimplify(eta_e.subs(x, val))


def pinned_limit(t, a1, a2, q, m):
    """Degenerate-branch values as the exact limit phi -> m (cancel, then evaluate)."""
    kappa = (c_exact(m, a1, a2, q) * sp.sqrt(q) + c_exact(m - 1, a1, a2, q) / sp.sqrt(q)) / 2
    xi_e, eta_e, x = xi_eta_exact(t, a1, a2, q, m, kappa)
    return (sp.cancel(sp.together(xi_e)).subs(x, q**m),
            sp.cancel(sp.together(eta_e)).subs(x, q**m))


# -- c_n ---------------------------------------------------------------------

def test_c_coeff_examples():
    assert c_coeff(0, 1, 1, 0.5) == 4 and c_coeff(7, 1, 1, 0.5) == 4
    assert c_coeff(0, 3, 1, 0.5) == pytest.approx(28 / 3, abs=1e-14)
    assert c_coeff(1, 3, 1, 0.5) == pytest.approx(20 / 3, abs=1e-14)
    assert c_coeff(3, 1, 1, 0.25) == pytest.approx(8 / 3, abs=1e-14)
    h = sp.Rational(1, 2)
    assert c_exact(0, 3, 1, h) == sp.Rational(28, 3)
    assert c_exact(1, 3, 1, h) == sp.Rational(20, 3)


def test_c_coeff_real_argument_is_cosine():
    assert c_coeff(0.5, 3, 1, 0.5) == pytest.approx((3 + 1) / (1 - 0.5), abs=1e-12)  # cos(pi/2) = 0
    assert c_coeff(2.0, 3, 1, 0.5) == c_coeff(2, 3, 1, 0.5)


# -- parameters --------------------------------------------------------------

@pytest.mark.parametrize("kw", [dict(r=3, s=1), dict(r=2, s=2), dict(q=1.5), dict(q=0.0),
                                dict(alphas=(1.0, 0.0)), dict(alphas=(1.0,)), dict(epsilon=0)])
def test_param_validation(kw):
    base = dict(r=2, s=1, q=0.5, alphas=(1.0, 1.0), phi=0.5)
    base.update(kw)
    with pytest.raises(ParameterError):
        ChainParams(**base)


def test_theta_and_floor():
    p = ChainParams(r=2, s=1, q=0.5, alphas=(1, 1), phi=2.75)
    assert p.floor_phi == 2 and p.theta == pytest.approx(0.25)
    p = ChainParams(r=2, s=1, q=0.5, alphas=(1, 1), phi=-0.25)
    assert p.floor_phi == -1 and p.theta == pytest.approx(0.25)


# -- kappa window ------------------------------------------------------------

def test_kappa_window_setup_g(setup_g):
    con = kappa_constraint(setup_g)
    assert con.kind == "open-interval"
    assert con.lo == pytest.approx(8.0, abs=1e-14) and con.hi == pytest.approx(10.0, abs=1e-14)
    assert setup_g.kappa == pytest.approx(4.5)


def test_kappa_pinned_setup_s(setup_s):
    con = kappa_constraint(setup_s)
    assert con.kind == "pinned-point" and con.lo == con.hi == con.pinned
    exact = 4 * sp.sqrt(sp.Rational(1, 2)) + 4 * sp.sqrt(2)
    assert sp.simplify(exact - 6 * sp.sqrt(2)) == 0
    assert con.pinned == pytest.approx(float(exact), abs=1e-13)
    assert setup_s.kappa == pytest.approx(3 * math.sqrt(2), abs=1e-13)


def test_symmetric_upper_candidates():
    """Equal alphas make c constant; the two upper candidates are then
    cosh-type in theta + 1 and theta - 1 and agree exactly when theta = 0."""
    c = c_coeff(0, 2, 2, 0.3)
    for phi, equal in ((0.5, True), (1.5, True), (0.3, False)):
        th = ChainParams(r=2, s=1, q=0.3, alphas=(2, 2), phi=phi).theta
        up1 = c * (0.3 ** (th + 1) + 0.3 ** (-th - 1))
        up2 = c * (0.3 ** (th - 1) + 0.3 ** (-th + 1))
        assert math.isclose(up1, up2, rel_tol=1e-12) is equal


@pytest.mark.parametrize("kappa,bound", [(5.5, "upper"), (3.9, "lower")])
def test_kappa_out_of_range_names_bound(setup_g, w40, kappa, bound):
    with pytest.raises(KappaOutOfRange) as err:
        validate(setup_g.replace(kappa=kappa), w40)
    assert err.value.bound == bound
    assert err.value.radicand[0] < 0


def test_kappa_pinned_mismatch(setup_s, w40):
    with pytest.raises(KappaOutOfRange) as err:
        validate(setup_s.replace(kappa=4.0), w40)
    assert err.value.bound == "pinned"


# -- xi, eta -----------------------------------------------------------------

def test_xi_eta_at_zero_setup_g(setup_g):
    h = sp.Rational(1, 2)
    xe, ye = exact_value(0, 1, 1, h, h, sp.Rational(9, 2))
    assert xe == sp.Rational(1, 7) and ye == sp.Rational(4, 7)
    assert xi(0, setup_g) == pytest.approx(1 / 7, abs=1e-15)
    assert eta(0, setup_g) == pytest.approx(4 / 7, abs=1e-15)


def test_asymptotics_setup_g(setup_g):
    assert 0 < xi(20, setup_g) < 1e-4
    assert abs(eta(20, setup_g) - 2.0) < 1e-4
    assert 0 < eta(-20, setup_g) < 1e-4


@pytest.mark.parametrize("t", [-3, 0, 1, 4])
def test_generic_matches_exact_arithmetic(t):
    q, a1, a2, phi, kappa = (sp.Rational(9, 10), 2, 1, sp.Rational(1, 4), None)
    p = ChainParams(r=2, s=1, q=0.9, alphas=(2.0, 1.0), phi=0.25)
    xe, ye, x = xi_eta_exact(t, a1, a2, q, phi, sp.nsimplify(p.kappa))
    val = sp.Float(0.9, 40) ** sp.Float(0.25, 40)
    assert xi(t, p) == pytest.approx(float(xe.subs(x, val)), rel=1e-12)
    assert eta(t, p) == pytest.approx(float(ye.subs(x, val)), rel=1e-12)


@pytest.mark.parametrize("t", [-3, -2, -1, 0, 1, 2, 5])
def test_pinned_branch_matches_exact_limit(setup_s, t):
    xe, ye = pinned_limit(t, 1, 1, sp.Rational(1, 2), 0)
    assert xi(t, setup_s) == pytest.approx(float(xe), rel=1e-13)
    assert eta(t, setup_s) == pytest.approx(float(ye), rel=1e-13)


@pytest.mark.parametrize("t", [-2, -1, 0, 1, 3])
def test_pinned_branch_asymmetric_exact(t):
    p = ChainParams(r=2, s=1, q=0.5, alphas=(3.0, 1.0), phi=1.0)
    xe, ye = pinned_limit(t, 3, 1, sp.Rational(1, 2), 1)
    assert xi(t, p) == pytest.approx(float(xe), rel=1e-12)
    assert eta(t, p) == pytest.approx(float(ye), rel=1e-12)


@pytest.mark.parametrize("m", [0, 1])
@pytest.mark.parametrize("t", [-2, -1, 0, 1, 2])
def test_richardson_in_phi(m, t):
    """Generic formula at phi = m +- delta, kappa held at the pinned value,
    extrapolated to delta -> 0, reproduces the degenerate branch."""
    base = ChainParams(r=2, s=1, q=0.5, alphas=(1.5, 1.0), phi=float(m))
    k = base.kappa

    def sym(fn, d):
        up = fn(t, base.replace(phi=m + d, kappa=k), parity=t)
        dn = fn(t, base.replace(phi=m - d, kappa=k), parity=t)
        return 0.5 * (up + dn)

    for fn in (xi, eta):
        f1, f2 = sym(fn, 1e-4), sym(fn, 1e-5)
        extrap = (1e-8 * f2 - 1e-10 * f1) / (1e-8 - 1e-10)  # error is O(delta^2)
        assert extrap == pytest.approx(fn(t, base), abs=1e-8)


# -- construction and validation --------------------------------------------

def test_build_pair_positive(setup_g, w40):
    A1, A2, A0 = build_pair(setup_g, w40)
    assert np.all(A1.b > 0) and np.all(A2.b > 0) and np.all(A0.b > 0)
    assert np.array_equal(A0.a[:-1], A2.a[1:])
    assert np.array_equal(A0.b[:-1], A2.b[1:])


def test_build_pair_rejects_bad_kappa(setup_g, w40):
    with pytest.raises(NegativeCoefficient) as err:
        build_pair(setup_g.replace(kappa=5.5), w40)
    assert err.value.value < 0 and err.value.which.split("_")[0] in ("xi", "eta")


def test_epsilon_flip(setup_g, w40):
    A = build_pair(setup_g, w40)
    B = build_pair(setup_g.replace(epsilon=1), w40)
    for x, y in zip(A, B):
        assert np.array_equal(x.a, -y.a) and np.array_equal(x.b, y.b)


def test_validate_setups(setup_g, setup_s, w40):
    assert validate(setup_g, w40).max_residual <= 1e-12
    assert validate(setup_s, w40).max_residual <= 1e-10
    p = ChainParams(r=2, s=1, q=0.9, alphas=(2.0, 1.0), phi=0.25)
    assert validate(p, w40).max_residual <= 1e-11


def test_residual_exact_spot_check():
    """One interior site of L_1 = A_1 A_1^+ - alpha_1 = q A_0^+ A_0 in exact arithmetic."""
    q, k = sp.Rational(1, 2), sp.Rational(9, 2)
    h = sp.Rational(1, 2)

    def X(t):
        return exact_value(t, 1, 1, q, h, k)[0]

    def Y(t):
        return exact_value(t, 1, 1, q, h, k)[1]

    n = 0
    # a_1(n)^2 = xi_{2n}, b_1(n)^2 = eta_{2n+1}, a_0(n)^2 = xi_{2n+1}, b_0(n)^2 = eta_{2n+2}
    lhs_d = X(2 * n) + Y(2 * n + 1) - 1
    rhs_d = q * (X(2 * n + 1) + Y(2 * n))
    assert sp.simplify(lhs_d - rhs_d) == 0
    lhs_o = sp.sqrt(X(2 * n + 2) * Y(2 * n + 1))
    rhs_o = q * sp.sqrt(X(2 * n + 1) * Y(2 * n + 2))
    assert sp.simplify(lhs_o - rhs_o) == 0


def test_min_radicand_locates(setup_g, w40):
    val, label, site = min_radicand(setup_g.replace(kappa=5.5), w40)
    assert val < 0 and label and w40.n_min <= site <= w40.n_max
