import math

import numpy as np
import pytest

from qdchain.continuum import (
    TEST_FUNCTIONS,
    LimitConfig,
    continuum_target,
    discrete_apply,
    h_sweep,
    limit_error,
    q_of_h,
)
from qdchain.errors import ParameterError, PoleProximity, SingularAtZero

GRID_SYM = np.linspace(-1, 1, 21)
GRID_ASYM = np.linspace(0.5, 2, 21)
HS = (0.2, 0.1, 0.05, 0.025)


def decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def test_q_of_h_examples():
    assert q_of_h(1, 0) == 1
    assert q_of_h(1, 0.1) == pytest.approx(0.99750312, abs=1e-8)
    assert q_of_h(4, 1) == pytest.approx(math.exp(-1), abs=1e-8)
    hs = np.linspace(0, 3, 30)
    qs = [q_of_h(2, h) for h in hs]
    assert all(0 < x <= 1 for x in qs) and decreasing(qs)
    with pytest.raises(ParameterError):
        q_of_h(0, 0.1)


def test_target_examples():
    one, zero = (lambda x: np.ones_like(x)), (lambda x: np.zeros_like(x))
    assert continuum_target((1, 1), 1, 2.0, one, zero) == 1.0
    assert continuum_target((3, 1), 1, 1.0, one, zero) == pytest.approx(-11 / 16, abs=1e-15)
    with pytest.raises(SingularAtZero):
        continuum_target((3, 1), 1, 0.0, one, zero)


def test_discrete_apply_basic():
    f, f2 = TEST_FUNCTIONS["gauss"]
    cfg = LimitConfig((1, 1), 0.05)
    zero = lambda x: np.zeros_like(x)
    assert discrete_apply(cfg, zero, 0.5) == 0
    assert abs(discrete_apply(cfg, f, 0.5) - continuum_target((1, 1), 1, 0.5, f, f2)) <= 0.02
    g, _ = TEST_FUNCTIONS["cos_gauss"]
    x = np.linspace(-1, 1, 11)
    lhs = discrete_apply(cfg, lambda t: f(t) + g(t), x)
    assert np.allclose(lhs, discrete_apply(cfg, f, x) + discrete_apply(cfg, g, x), atol=1e-12)


def test_pole_guard():
    cfg = LimitConfig((3, 1), 0.1, j=2, centered=False)
    f, _ = TEST_FUNCTIONS["gauss"]
    # eta of L_2 has argument 2n with even parity: pole at t = -1, i.e. x = -h/2
    with pytest.raises(PoleProximity):
        discrete_apply(cfg, f, -0.05)


def test_zero_function_error():
    zero = lambda x: np.zeros_like(x)
    for h in HS:
        assert limit_error(LimitConfig((1, 1), h, tuple(GRID_SYM)), zero, zero) == 0


@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_symmetric_sweep(name):
    f, f2 = TEST_FUNCTIONS[name]
    rows = h_sweep((1, 1), HS, GRID_SYM, f, f2)
    errs = [r[2] for r in rows]
    ratios = [r[3] for r in rows]
    assert decreasing(errs) and decreasing(ratios)


@pytest.mark.parametrize("j", [1, 2])
@pytest.mark.parametrize("name", sorted(TEST_FUNCTIONS))
def test_asymmetric_sweep(name, j):
    f, f2 = TEST_FUNCTIONS[name]
    rows = h_sweep((3, 1), HS, GRID_ASYM, f, f2, j=j)
    assert decreasing([r[2] for r in rows]) and decreasing([r[3] for r in rows])


def test_second_order_rate():
    """Halving h divides the error by about four once the chain index is centred."""
    f, f2 = TEST_FUNCTIONS["gauss"]
    errs = [r[2] for r in h_sweep((3, 1), HS, GRID_ASYM, f, f2)]
    assert 3.5 < errs[-2] / errs[-1] < 4.5


def test_uncentred_l1_is_first_order():
    """Placing L_1 at x = n h leaves an error of size h V'(x)/2."""
    f, f2 = TEST_FUNCTIONS["gauss"]
    rows = h_sweep((1, 1), HS, GRID_SYM, f, f2, j=1, centered=False)
    ratios = [r[3] for r in rows]
    assert ratios[-1] > 0.85 * ratios[-2]
    centred = [r[3] for r in h_sweep((1, 1), HS, GRID_SYM, f, f2, j=1)]
    assert centred[-1] < 0.6 * centred[-2]
