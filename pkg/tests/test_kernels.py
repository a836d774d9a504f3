import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from picmv.kernels import (
    BreakpointTable,
    build_breakpoints,
    prox_objective,
    prox_socp,
    solve_t,
    solve_wy,
    update_phi,
    update_theta,
    wy_kkt_residuals,
)
from picmv.oracle import prox_grid_oracle, t_derivative, t_grid_oracle
from picmv.validation import random_prox, random_table, random_wy

# ---------------------------------------------------------------- prox


def test_prox_interior():
    x, y = prox_socp(1, 0, 1, 0, 1, 0, 0)
    assert x == 0 and y == 0


def test_prox_disk_projection():
    x, y = prox_socp(1, -2, 0.5, 0, 1, 0, 0)
    assert x == pytest.approx(0.5) and y == 0


def test_prox_coupled_cone():
    x, y = prox_socp(1, 0, 1, 2, 1, -2, 0.5)
    assert x == pytest.approx(1.2) and y == pytest.approx(0.4)
    assert abs(x - 2) + 0.5 * y == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize(
    "args",
    [(1, 0, 1, 0, 1, 0, 0), (1, -2, 0.5, 0, 1, 0, 0), (1, 0, 1, 2, 1, -2, 0.5)],
)
def test_prox_matches_grid_oracle(args):
    x, y = prox_socp(*args)
    a, b, c, d, alpha, beta, delta = args
    xo, yo, fo, h = prox_grid_oracle(a, b, c, d, alpha, beta, delta)
    assert abs(xo - x) < 1e-3 and abs(yo - y) < 1e-3
    assert prox_objective(a, b, alpha, beta, x, y) <= fo + 1e-8


def test_prox_zero_radius_forces_center():
    x, y = prox_socp(1, 3 + 1j, 0, 1 - 2j, 1, 1, 0)
    assert x == pytest.approx(1 - 2j)
    xo, _, _, _ = prox_grid_oracle(1, 3 + 1j, 0, 1 - 2j, 1, 1, 0)
    assert xo == pytest.approx(1 - 2j)


def test_prox_psi_convention_when_direction_undefined():
    # 2ad + b = 0: x stays at d whatever the radius
    x, _ = prox_socp(1, -2 * (0.3 + 0.4j), 1, 0.3 + 0.4j, 1, 0, 0.1)
    assert x == pytest.approx(0.3 + 0.4j)


def test_prox_rejects_bad_inputs():
    with pytest.raises(ValueError):
        prox_socp(0, 0, 1, 0, 1, 0, 0)
    with pytest.raises(ValueError):
        prox_socp(1, 0, -1, 0, 1, 0, 0)


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_prox_feasible_and_not_worse_than_center(seed):
    kw = random_prox(np.random.default_rng(seed))
    x, y = prox_socp(**kw)
    assert abs(x - kw["d"]) + kw["delta"] * y <= kw["c"] + 1e-12 * (1 + abs(kw["c"]))
    # (d, y0) is feasible for a suitable y0
    y0 = min(kw["c"] / kw["delta"], -kw["beta"] / (2 * kw["alpha"])) if kw["delta"] > 0 else -kw["beta"] / (2 * kw["alpha"])
    f = prox_objective(kw["a"], kw["b"], kw["alpha"], kw["beta"], x, y)
    f0 = prox_objective(kw["a"], kw["b"], kw["alpha"], kw["beta"], kw["d"], y0)
    assert f <= f0 + 1e-9 * (1 + abs(f0))


# ---------------------------------------------------------------- (w, y)

EYE2 = (np.eye(2, dtype=complex), np.ones(2))


def test_wy_zero_branch():
    w, y, br = solve_wy(*EYE2, np.zeros(2), 1.0, 0.0, return_branch=True)
    assert br == "zero" and y == 0 and not np.any(w)


def test_wy_interior_branch():
    w, y, br = solve_wy(*EYE2, np.array([-2.0, 0]), 1.0, -4.0, return_branch=True)
    assert br == "interior"
    assert y == pytest.approx(2.0) and np.allclose(w, [1, 0])


def test_wy_boundary_branch():
    b = np.array([-4.0, 0])
    w, y, br = solve_wy(*EYE2, b, 1.0, 0.0, return_branch=True)
    assert br == "boundary"
    assert y == pytest.approx(1.0, abs=1e-10) and np.allclose(w, [1, 0], atol=1e-10)
    stat, comp, primal = wy_kkt_residuals(*EYE2, b, 1.0, 0.0, w, y)
    assert max(stat, comp, primal) < 1e-8


def test_wy_beta_equal_norm_is_zero_branch():
    _, _, br = solve_wy(*EYE2, np.array([3.0, 4.0]), 1.0, 5.0, return_branch=True)
    assert br == "zero"


def test_wy_rejects_indefinite():
    with pytest.raises(ValueError):
        solve_wy(np.eye(2), np.array([1.0, 0.0]), np.ones(2), 1.0, 0.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_wy_kkt_random(seed):
    u, lam, b, alpha, beta = random_wy(np.random.default_rng(seed))
    w, y = solve_wy(u, lam, b, alpha, beta)
    stat, comp, primal = wy_kkt_residuals(u, lam, b, alpha, beta, w, y)
    assert max(stat, comp) <= 1e-8 and primal <= 1e-10 * max(1.0, y)


def test_wy_secular_function_decreasing():
    rng = np.random.default_rng(8)
    for _ in range(50):
        u, lam, b, alpha, beta = random_wy(rng)
        bb = np.abs(u.conj().T @ b) ** 2
        lo = max(0.0, -beta / (2 * alpha)) + 1e-9
        hi = np.linalg.norm(u.conj().T @ b / lam) / 2
        if hi <= lo:
            continue
        ys = np.linspace(lo, hi, 50)
        f = [np.sum(bb / ((2 * lam + 2 * alpha) * y + beta) ** 2) for y in ys]
        assert np.all(np.diff(f) < 0)


# ---------------------------------------------------------------- theta / phi


def test_update_theta_fixed_point():
    y, z = update_theta(1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5)
    assert z == pytest.approx(1.0) and y == pytest.approx(0.0)


def test_update_theta_disk_projection():
    y, z = update_theta(2.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.5)
    assert z == pytest.approx(1.5) and y == pytest.approx(0.0)


def test_update_theta_phi_are_prox_instances():
    rng = np.random.default_rng(21)
    n = 1000
    inner = rng.normal(size=n) + 1j * rng.normal(size=n)
    lam = rng.normal(size=n) + 1j * rng.normal(size=n)
    eta = rng.normal(size=n)
    rho, delta, y = 2.5, 0.3, 0.7
    c = rng.uniform(0, 1, n)
    yt, zt = update_theta(inner, lam, eta, y, rho, delta, c)
    xp, yp = prox_socp(rho / 2, -lam - rho * inner, c, 1.0, rho / 2, -eta - rho * y, delta)
    assert np.max(np.abs(zt - xp)) <= 1e-12 and np.max(np.abs(yt - yp)) <= 1e-12
    b = -lam - rho * inner
    beta = -eta - rho * y
    gam = rng.uniform(0.1, 1, n)
    yph, zph = update_phi(1.3, b, beta, rho, delta, c + 0.1, gam)
    xq, yq = prox_socp(rho / 2, b, 1.3 * (c + 0.1) / gam, 0.0, rho / 2, beta, delta)
    assert np.max(np.abs(zph - xq)) <= 1e-12 and np.max(np.abs(yph - yq)) <= 1e-12
    assert np.all(np.abs(zph) + delta * yph <= 1.3 * (c + 0.1) / gam + 1e-12)


def test_update_phi_zero_input():
    y, z = update_phi(1.0, 0.0, 0.0, 1.0, 0.5, 1.0, 1.0)
    assert y == 0 and z == 0


def test_update_phi_negative_t_without_delta():
    with pytest.raises(ValueError):
        update_phi(-0.1, 1.0, 0.0, 1.0, 0.0, 1.0, 1.0)


# ---------------------------------------------------------------- breakpoints / t

B_PHI = np.exp(0.7j)  # |b| = 1, arbitrary phase


def example_table():
    return build_breakpoints(B_PHI, -1.0, 1.0, 1.0, 1.0, 1.0)


def test_breakpoint_example():
    tab = example_table()
    assert tab.a1[0] == pytest.approx(0.5) and tab.b1[0] == pytest.approx(-1.0)
    assert tab.a2[0] == pytest.approx(0.25) and tab.b2[0] == pytest.approx(-1.0)
    assert tab.t1[0] == pytest.approx(0.0) and tab.t2[0] == pytest.approx(2.0)


def test_breakpoint_cancellation():
    tab = build_breakpoints(2.0, -0.5 * 2.0, 1.0, 0.5, 1.0, 1.0)
    assert tab.t1[0] == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_breakpoint_continuity(seed):
    tab = random_table(np.random.default_rng(seed))[0]

    def first(t):
        return tab.a1 * t**2 + tab.b1 * t

    def mid(t):
        return tab.a2 * t**2 + tab.b2 * t + tab.c2

    scale = 1 + np.abs(tab.c3) + np.abs(tab.b2 * tab.t2) + tab.a2 * tab.t2**2
    assert np.all(np.abs(mid(tab.t2) - tab.c3) <= 1e-9 * scale)
    if not np.isfinite(tab.lower):
        assert np.all(np.abs(first(tab.t1) - mid(tab.t1)) <= 1e-9 * scale)
        # derivative matches too
        d1 = 2 * tab.a1 * tab.t1 + tab.b1
        d2 = 2 * tab.a2 * tab.t1 + tab.b2
        assert np.all(np.abs(d1 - d2) <= 1e-9 * (1 + np.abs(tab.b1) + np.abs(tab.b2)))


def test_f_phi_matches_prox_value():
    # f_phi(t) is the optimal prox value at c = t c / gamma
    rng = np.random.default_rng(4)
    for _ in range(100):
        b = rng.normal() + 1j * rng.normal()
        beta, rho, delta = rng.normal(), rng.uniform(0.5, 3), rng.uniform(0.05, 1)
        tab = build_breakpoints(b, beta, rho, delta, 0.8, 0.6)
        t = rng.uniform(tab.t1[0] - 1, tab.t2[0] + 1)
        z, y = prox_socp(rho / 2, b, t * 0.8 / 0.6, 0.0, rho / 2, beta, delta)
        val = prox_objective(rho / 2, b, rho / 2, beta, z, y)
        assert tab.value(t) == pytest.approx(val, abs=1e-9 * (1 + abs(val)))


def test_solve_t_example():
    assert solve_t(example_table(), 0.1) == pytest.approx(1.8, abs=1e-12)
    assert t_grid_oracle(example_table(), 0.1) == pytest.approx(1.8, abs=1e-6)


def test_update_phi_continues_example():
    y, z = update_phi(1.8, B_PHI, -1.0, 1.0, 1.0, 1.0, 1.0)
    assert y == pytest.approx(0.9)
    assert z == pytest.approx(-0.9 * B_PHI)
    assert abs(z) + y == pytest.approx(1.8)


def test_solve_t_no_penalty():
    tab = example_table()
    t = solve_t(tab, 0.0)
    assert tab.slope(t) == pytest.approx(0.0, abs=1e-12)
    assert tab.value(t) == pytest.approx(tab.value(tab.t2.max()), abs=1e-12)


def test_solve_t_empty():
    e = np.zeros(0)
    with pytest.raises(ValueError):
        solve_t(BreakpointTable(e, e, e, e, e, e, e, e), 1.0)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_solve_t_stationarity(seed):
    tab, mu = random_table(np.random.default_rng(seed))
    t = solve_t(tab, mu)
    scale = 1 + mu + np.sum(np.abs(tab.b2)) + np.sum(np.abs(tab.b1))
    if mu > 0:
        if np.isfinite(tab.lower) and t == tab.lower:
            assert t_derivative(tab, mu, t) >= -1e-9 * scale
        else:
            assert abs(t_derivative(tab, mu, t)) <= 1e-9 * scale


def test_derivative_monotone():
    rng = np.random.default_rng(12)
    for _ in range(100):
        tab, _ = random_table(rng)
        bp = tab.breakpoints
        ts = np.linspace(bp.min() - 5, bp.max() + 5, 400)
        if np.isfinite(tab.lower):
            ts = ts[ts >= tab.lower]
        d = np.array([tab.slope(t) for t in ts])
        assert np.all(np.diff(d) >= -1e-9 * (1 + np.abs(d[:-1])))
        left = ts < bp.max() - 1e-6
        if np.isfinite(tab.lower) and tab.lower == 0 and left.sum() > 1:
            assert np.all(np.diff(d[left]) > 0)
