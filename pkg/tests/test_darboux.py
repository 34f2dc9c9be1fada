import numpy as np
import pytest

from qdchain import (
    ChainParams,
    DarbouxChain,
    LatticeFunction,
    LatticeWindow,
    accumulation_point,
    completeness_defect,
    eigenbasis,
    eigenvalue_table,
    ground_state,
    ladder,
    norm_bound,
)
from qdchain.darboux import eigen_residual, gram_matrix
from qdchain.errors import NotSquareSummable, WindowTooSmall
from qdchain.lattice import make_first_order
from qdchain.tridiag import oracle_spectrum


def test_table_examples(setup_g):
    assert eigenvalue_table(setup_g, 1, 4).levels == (0, 0.5, 0.75, 0.875, 0.9375)
    p = ChainParams(r=2, s=1, q=0.5, alphas=(3.0, 1.0), phi=0.5)
    t = eigenvalue_table(p, 1, 2)
    assert t[0] == 0 and t[1] == 0.5 and t[2] == 1.25


def test_table_monotone_and_bounded():
    p = ChainParams(r=2, s=1, q=0.7, alphas=(2.0, 0.5), phi=0.3)
    for j in (1, 2):
        lev = np.array(eigenvalue_table(p, j, 40).levels)
        assert np.all(np.diff(lev) > 0)
        lam_inf = accumulation_point(p, j)
        assert np.all(lev < lam_inf)
        k = np.arange(1, 41)
        assert np.all(np.abs(lev[1:] - lam_inf) <= lam_inf * p.q ** (k - 1))


def test_accumulation_point_r2_formula():
    p = ChainParams(r=2, s=1, q=0.6, alphas=(1.5, 0.5), phi=0.5)
    q, a1, a2 = p.q, 1.5, 0.5
    assert accumulation_point(p, 1) == pytest.approx((q * q * a1 + q * a2) / (1 - q * q))
    assert accumulation_point(p, 2) == pytest.approx((q * q * a2 + q * a1) / (1 - q * q))


def test_ground_state_recursion_and_kernel(setup_g, w40):
    chain = DarbouxChain.from_params(setup_g, w40)
    A0 = chain.A(0)
    psi = ground_state(A0)
    v = psi.values
    i = int(np.argmax(np.abs(v)))
    assert v[i + 1] / v[i] == pytest.approx(-A0.a[i] / A0.b[i], rel=1e-14)
    assert np.linalg.norm(chain.L(1).matvec(v)) <= 1e-10
    assert psi.norm() == pytest.approx(1.0, abs=1e-12)


def test_ground_state_epsilon_flip(setup_g, w40):
    p = ground_state(DarbouxChain.from_params(setup_g, w40).A(0)).values
    m = ground_state(DarbouxChain.from_params(setup_g.replace(epsilon=1), w40).A(0)).values
    sign = (-1.0) ** w40.sites
    assert min(np.abs(p - sign * m).max(), np.abs(p + sign * m).max()) < 1e-14


def test_ground_state_not_summable():
    w = LatticeWindow(0, 30)
    A = make_first_order(np.full(31, 2.0), np.ones(31), w)  # ratio -2 everywhere
    with pytest.raises(NotSquareSummable):
        ground_state(A)


def test_ladder_identities(setup_g, w60):
    chain = DarbouxChain.from_params(setup_g, w60)
    for j in (1, 2):
        for pair in eigenbasis(chain, j, 7):
            img = ladder(pair.psi, chain.A(j))
            assert img.inner(img) == pytest.approx(pair.lam + chain.alpha(j), abs=1e-10)
    g1 = eigenbasis(chain, 1, 0)[0].psi
    g2 = eigenbasis(chain, 2, 0)[0].psi
    assert abs(g2.inner(ladder(g1, chain.A(1)))) < 1e-10
    z = LatticeFunction.zeros(w60)
    assert np.all(ladder(z, chain.A(1)).values == 0)


def test_eigenbasis_residuals_and_gram(setup_g, w60):
    chain = DarbouxChain.from_params(setup_g, w60)
    basis = eigenbasis(chain, 1, 7)
    L1 = chain.L(1)
    assert max(eigen_residual(L1, p) for p in basis) <= 1e-8
    assert np.abs(gram_matrix(basis) - np.eye(8)).max() <= 1e-8
    assert len(eigenbasis(chain, 1, 0)) == 1


def test_eigenbasis_window_too_small(setup_g):
    with pytest.raises(WindowTooSmall):
        eigenbasis(setup_g, 1, 30, LatticeWindow(-12, 12))


def test_oracle_agreement_generic():
    p = ChainParams(r=2, s=1, q=0.7, alphas=(2.0, 1.0), phi=0.25)
    chain = DarbouxChain.from_params(p, LatticeWindow(-80, 80))
    for j in (1, 2):
        pred = eigenvalue_table(p, j, 7).levels
        orc = oracle_spectrum(chain.L(j), 8)
        assert np.allclose(pred, orc, atol=1e-8)
        assert orc[-1] < norm_bound(chain.L(j))


def test_spectra_independent_of_epsilon(setup_g, w60):
    a = oracle_spectrum(DarbouxChain.from_params(setup_g, w60).L(1), 8)
    b = oracle_spectrum(DarbouxChain.from_params(setup_g.replace(epsilon=1), w60).L(1), 8)
    assert np.allclose(a, b, atol=1e-10)


def test_completeness_defect_examples(setup_g, w60):
    basis = eigenbasis(setup_g, 1, 7, w60)
    v = LatticeFunction.delta(w60, 3)
    assert completeness_defect([], v) == 1.0
    assert completeness_defect(basis, basis[3].psi) <= 1e-12


def test_completeness_defect_decays_with_levels(setup_g, w60):
    """The defect of delta_0 matches the dense tail weight where the levels
    are resolvable, then keeps shrinking by a fixed factor per level."""
    chain = DarbouxChain.from_params(setup_g, w60)
    d0 = LatticeFunction.delta(w60, 0)
    basis = eigenbasis(chain, 1, 60)
    vals, vecs = np.linalg.eigh(chain.L(1).matrix())
    weights = vecs[w60.index(0)] ** 2
    for K in (10, 20, 30):
        assert completeness_defect(basis[:K + 1], d0) == pytest.approx(weights[K + 1:].sum(),
                                                                      rel=1e-6)
    d = np.array([completeness_defect(basis[:K + 1], d0) for K in range(40, 61, 4)])
    rate = d[1:] / d[:-1]
    assert np.all(rate < 1) and np.ptp(rate) < 1e-3


def test_completeness_defect_window_independent(setup_g, w60):
    big = LatticeWindow(-80, 80)
    a = completeness_defect(eigenbasis(setup_g, 1, 60, w60), LatticeFunction.delta(w60, 0))
    b = completeness_defect(eigenbasis(setup_g, 1, 60, big), LatticeFunction.delta(big, 0))
    assert a == pytest.approx(b, rel=1e-6)
