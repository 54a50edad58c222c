import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from spa_inattention import model as mc
from spa_inattention.discretization import build_grid, discretize_ar1, snap_down
from spa_inattention.ri_solver import entropy, ri_fixed_point

P = mc.ModelParams()
finite = st.floats(-5, 5, allow_nan=False)


@given(st.floats(0.0, 0.5), st.integers(20, 69))
def test_prior_is_distribution(p_step, age):
    d = mc.no_receipt_prior(age, mc.ModelParams(p_spa_step=p_step))
    assert np.all(d >= 0) and abs(d.sum() - 1) <= 1e-12


@given(st.floats(0.0, 1.0), st.integers(60, 70))
def test_spa_never_decreases(p_step, spa):
    out = mc.spa_transition(spa, False, mc.ModelParams(p_spa_step=p_step))
    assert all(s >= spa for s in out) and abs(sum(out.values()) - 1) <= 1e-12


@given(st.floats(1.0, 1e6), st.floats(1.0, 1e6))
def test_utility_increasing(c1, c2):
    lo, hi = sorted((c1, c2))
    if hi > lo:
        assert mc.flow_utility(hi, 1.0, P) > mc.flow_utility(lo, 1.0, P)
    assert mc.flow_utility(lo, 1.0, P) >= mc.flow_utility(lo, 1.0 - P.work_hours, P)


@given(st.floats(0.0, 0.99), st.floats(0.01, 1.0), st.integers(2, 9))
def test_chain_rows_stochastic(rho, sigma, n):
    ch = discretize_ar1(rho, sigma, n)
    assert np.allclose(ch.transition.sum(axis=1), 1, atol=1e-12, rtol=0)
    assert abs(ch.initial.sum() - 1) <= 1e-12


@given(st.floats(0, 1e5), st.integers(2, 40), st.floats(1.0, 4.0))
def test_snap_down_is_floor(value, n, curv):
    g = build_grid(0.0, 1e5, n, curv)
    i = snap_down(value, g)
    assert g.points[i] <= value and (i == n - 1 or g.points[i + 1] > value)


@st.composite
def ri_instances(draw):
    S = draw(st.integers(2, 3))
    D = draw(st.integers(2, 4))
    z = draw(arrays(float, (S, D), elements=finite))
    w = draw(arrays(float, S, elements=st.floats(0.05, 1.0)))
    lam = draw(st.floats(0.05, 5.0))
    return z, w / w.sum(), lam


@settings(max_examples=60, deadline=None)
@given(ri_instances())
def test_fixed_point_bounds(inst):
    z, mu, lam = inst
    fp = ri_fixed_point(z, mu, lam)
    assert fp.residual[0] <= 1e-8
    info = fp.info
    assert -1e-15 <= info <= min(entropy(mu), np.log(z.shape[1])) + 1e-10
    # net value between the best blind choice and full information
    blind = np.max(mu @ z)
    full = mu @ z.max(axis=1)
    assert blind - 1e-9 <= fp.net_value <= full + 1e-9


@settings(max_examples=40, deadline=None)
@given(arrays(float, (2, 2), elements=finite), st.floats(0.1, 0.9))
def test_information_falls_with_cost(z, m):
    mu = np.array([m, 1 - m])
    infos = [ri_fixed_point(z, mu, lam, tol=1e-12).info for lam in (0.01, 0.1, 1.0, 10.0)]
    assert all(b <= a + 1e-9 for a, b in zip(infos, infos[1:]))
