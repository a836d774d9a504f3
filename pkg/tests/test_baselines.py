import numpy as np
import pytest

from picmv.admm import solve
from picmv.array import ArrayGeometry, Scenario, output_sinr, steering_matrix, steering_vector
from picmv.baselines import LinearConstraints, default_load, icmv, lcmv, lsmi, mvdr
from picmv.linalg import HermitianMatrix, SingularCovarianceError
from picmv.problem import InterferenceConstraintSet, PicmvProblem, TargetConstraintSet

G8 = ArrayGeometry.ula(8)


def rand_pd(rng, m):
    x = rng.normal(size=(2 * m, m)) + 1j * rng.normal(size=(2 * m, m))
    return HermitianMatrix(x.conj().T @ x / (2 * m) + 0.1 * np.eye(m))


def test_mvdr_identity_and_scale():
    a = steering_vector(G8, 20.0)
    assert np.allclose(mvdr(np.eye(8), a), a / 8)
    assert np.allclose(mvdr(2 * np.eye(8), a), a / 8)


def test_mvdr_distortionless():
    rng = np.random.default_rng(0)
    for _ in range(20):
        a = steering_vector(G8, rng.uniform(-90, 90))
        w = mvdr(rand_pd(rng, 8), a)
        assert abs(np.vdot(w, a) - 1) <= 1e-12


def test_mvdr_singular():
    with pytest.raises(SingularCovarianceError):
        mvdr(np.zeros((8, 8)), steering_vector(G8, 0.0))


def test_mvdr_attains_optimal_sinr():
    s = Scenario(G8, 0.0, 1.0, (-40.0,), (100.0,))
    w = mvdr(s.interference_noise_covariance(), s.true_steering[:, 0])
    assert output_sinr(w, s) == pytest.approx(10 * np.log10(s.optimal_sinr()), abs=1e-9)
    rng = np.random.default_rng(3)
    r_hat = rand_pd(rng, 8)
    best = output_sinr(w, s)
    for v in (mvdr(r_hat, s.true_steering[:, 0]), lsmi(r_hat, s.true_steering[:, 0], 1.0)):
        assert output_sinr(v, s) <= best + 1e-9


def test_lsmi_limits():
    rng = np.random.default_rng(1)
    r = rand_pd(rng, 8)
    a = steering_vector(G8, -15.0)
    assert np.array_equal(lsmi(r, a, 0.0), mvdr(r, a))
    w = lsmi(r, a, 1e12)
    cos = abs(np.vdot(w, a)) / (np.linalg.norm(w) * np.linalg.norm(a))
    assert cos == pytest.approx(1.0, abs=1e-9)
    with pytest.raises(ValueError):
        lsmi(r, a, -1.0)


def test_lsmi_continuous():
    rng = np.random.default_rng(2)
    r = rand_pd(rng, 8)
    a = steering_vector(G8, 33.0)
    for load in (0.0, 0.1, 1.0, 10.0):
        assert np.linalg.norm(lsmi(r, a, load + 1e-7) - lsmi(r, a, load)) < 1e-5


def test_default_load():
    r = HermitianMatrix(np.diag([3.0, 1.0, 7.0]))
    assert default_load(r) == pytest.approx(10.0)


def test_lcmv_single_constraint_is_mvdr():
    rng = np.random.default_rng(4)
    r = rand_pd(rng, 8)
    a = steering_vector(G8, 5.0)
    assert np.allclose(lcmv(r, LinearConstraints(a[:, None], [1.0])), mvdr(r, a))


def test_lcmv_dof_limit():
    c = steering_matrix(ArrayGeometry.ula(4), [-60.0, -30.0, 0.0, 30.0, 60.0])
    with pytest.raises(ValueError, match="degrees of freedom"):
        LinearConstraints(c, np.ones(5))


def test_lcmv_rank_deficient():
    c = steering_matrix(G8, [10.0, 10.0])
    with pytest.raises(ValueError, match="rank"):
        LinearConstraints(c, [1.0, 0.0])


def test_lcmv_null():
    s = Scenario(G8, 0.0, 1.0, (40.0,), (1000.0,))
    c = LinearConstraints(s.true_steering, [1.0, 0.0])
    w = lcmv(s.interference_noise_covariance(), c)
    assert abs(np.vdot(w, s.true_steering[:, 1])) <= 1e-10
    assert np.linalg.norm(c.C.conj().T @ w - c.f) <= 1e-10


def test_icmv_matches_picmv_at_its_eps():
    # P-ICMV at any mu returns eps*; ICMV with c' = eps* c_phi must find the same beamformer
    rng = np.random.default_rng(0)
    g = ArrayGeometry.ula(6)
    r = rand_pd(rng, 6)
    t = TargetConstraintSet(steering_matrix(g, [0.0, 5.0]), [0.3, 0.3])
    a = steering_matrix(g, [40.0, 45.0])
    p = PicmvProblem(r, t, InterferenceConstraintSet.from_groups([(a, [1.0, 1.0])]), mu=10.0, delta=0.01)
    bf = solve(p, tol=1e-9, max_iter=50000)
    e = bf.eps_lower[0]
    p2 = PicmvProblem(r, t, InterferenceConstraintSet.from_groups([(a, [e, e])]), mu=0.0, delta=0.01)
    b2 = icmv(p2, tol=1e-9, max_iter=50000)
    q1 = np.real(np.vdot(bf.w, r.entries @ bf.w))
    q2 = np.real(np.vdot(b2.w, r.entries @ b2.w))
    assert bf.converged and b2.converged
    assert q2 == pytest.approx(q1, rel=1e-3)


def test_icmv_against_conic_solver():
    cp = pytest.importorskip("cvxpy")
    rng = np.random.default_rng(5)
    g = ArrayGeometry.ula(6)
    r = rand_pd(rng, 6)
    t = TargetConstraintSet(steering_matrix(g, [-3.0, 3.0]), [0.2, 0.2])
    a = steering_matrix(g, [-40.0, 50.0])
    cphi = np.array([0.05, 0.1])
    delta = 0.02
    p = PicmvProblem(r, t, InterferenceConstraintSet.from_groups([(a, cphi)]), delta=delta)
    bf = icmv(p, tol=1e-9, max_iter=50000)
    w = cp.Variable(6, complex=True)
    chol = np.linalg.cholesky(r.entries)
    cons = [cp.abs(t.steering[:, i].conj() @ w - 1) + delta * cp.norm(w) <= 0.2 for i in range(2)]
    cons += [cp.abs(a[:, i].conj() @ w) + delta * cp.norm(w) <= cphi[i] for i in range(2)]
    prob = cp.Problem(cp.Minimize(cp.sum_squares(chol.conj().T @ w)), cons)
    prob.solve()
    q = np.real(np.vdot(bf.w, r.entries @ bf.w))
    assert q == pytest.approx(prob.value, rel=1e-3)


def test_icmv_flags_too_many_sources():
    g = ArrayGeometry.ula(4)
    t = TargetConstraintSet(steering_matrix(g, [0.0]), [0.0])
    nulls = [(steering_matrix(g, [ang]), [1e-6]) for ang in (-60.0, -30.0, 30.0, 60.0)]
    p = PicmvProblem(np.eye(4), t, InterferenceConstraintSet.from_groups(nulls))
    bf = icmv(p)
    assert not bf.converged and bf.infeasible_suspected
    # three interferers fit in the remaining degrees of freedom
    p3 = PicmvProblem(np.eye(4), t, InterferenceConstraintSet.from_groups(nulls[:3]))
    ok = icmv(p3, max_iter=5000)
    assert ok.converged and not ok.infeasible_suspected


def test_icmv_without_interference_is_mvdr():
    rng = np.random.default_rng(6)
    r = rand_pd(rng, 8)
    a = steering_vector(G8, -25.0)
    p = PicmvProblem(r, TargetConstraintSet(a[:, None], [0.0]), InterferenceConstraintSet.empty(8))
    bf = icmv(p, rho=1.0, tol=1e-10, max_iter=20000)
    w = mvdr(r, a)
    assert np.linalg.norm(bf.w - w) / np.linalg.norm(w) <= 1e-4
