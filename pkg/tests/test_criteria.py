import numpy as np
import pytest

from rsdesign import criteria, design_solver, errors, estimation, information, models
from rsdesign.exceptions import SingularInfo

from conftest import MM_THETA

MM_D_DESIGN = (np.array([191.285, 2000.0]), np.array([0.5, 0.5]))


def random_spd(rng, p):
    a = rng.normal(size=(p, p))
    return a @ a.T + 0.1 * np.eye(p)


def test_psi_d_identity():
    assert criteria.psi(criteria.d_criterion(), np.eye(3)) == pytest.approx(1.0)


def test_psi_d_scaled_identity():
    assert criteria.psi(criteria.d_criterion(), 4.0 * np.eye(2)) == pytest.approx(0.25)


def test_psi_c_diagonal():
    c = criteria.c_criterion([0.0, 1.0])
    assert criteria.psi(c, np.diag([4.0, 0.25])) == pytest.approx(4.0)


def test_psi_rejects_bad_inputs():
    with pytest.raises(SingularInfo):
        criteria.psi(criteria.d_criterion(), np.zeros((2, 2)))
    with pytest.raises(ValueError):
        criteria.c_criterion([0.0, 0.0])
    with pytest.raises(ValueError):
        criteria.Criterion("A")


def test_psi_positive_homogeneity():
    rng = np.random.default_rng(1)
    crits = [criteria.d_criterion(), criteria.c_criterion([1.0, -0.3, 0.7])]
    for _ in range(200):
        m = random_spd(rng, 3)
        k = float(rng.uniform(0.1, 10.0))
        for crit in crits:
            assert criteria.psi(crit, k * m) == pytest.approx(
                criteria.psi(crit, m) / k, rel=1e-10
            )


def test_psi_convexity_spot_check():
    rng = np.random.default_rng(2)
    crits = [criteria.d_criterion(), criteria.c_criterion([0.5, 1.0])]
    for _ in range(1000):
        a, b = random_spd(rng, 2), random_spd(rng, 2)
        lam = float(rng.uniform())
        mix = lam * a + (1 - lam) * b
        for crit in crits:
            lhs = criteria.psi(crit, mix)
            rhs = lam * criteria.psi(crit, a) + (1 - lam) * criteria.psi(crit, b)
            assert lhs <= rhs * (1 + 1e-12)


def test_phi_zero_at_reference_support(mm_model, d_crit):
    for x in (191.285, 2000.0):
        assert criteria.phi(d_crit, mm_model, MM_D_DESIGN, x) == pytest.approx(0.0, abs=1e-4)


def test_phi_grid_nonnegative_at_reference(mm_model, d_crit):
    grid = np.linspace(0.0, 2000.0, 4001)
    vals = criteria.phi_many(d_crit, mm_model, MM_D_DESIGN, grid)
    assert vals.min() >= -1e-4


def test_phi_one_point_c_design_saturates(mm_model):
    g = models.grad_eta(mm_model, 800.0)
    crit = criteria.c_criterion(g)  # interest along the attainable direction
    design = (np.array([800.0]), np.array([1.0]))
    assert criteria.phi(crit, mm_model, design, 800.0) == pytest.approx(0.0, abs=1e-10)


def test_phi_integral_identity(mm_model, d_crit):
    # sum of w_i * (p - phi(x_i)) over the design equals p
    rng = np.random.default_rng(3)
    for _ in range(50):
        support = np.sort(rng.uniform(10.0, 2000.0, 3))
        w = rng.dirichlet(np.ones(3))
        phis = criteria.phi_many(d_crit, mm_model, (support, w), support)
        assert np.sum(w * (mm_model.p - phis)) == pytest.approx(mm_model.p, abs=1e-8)


def test_phi_c_singular_design_in_range(comp_model):
    # two-point designs cannot estimate all three parameters, but a
    # direction inside the span is still assessable via the pseudoinverse
    support = np.array([0.2, 10.0])
    design = (support, np.array([0.6, 0.4]))
    g = models.grad_eta(comp_model, support)
    in_range = g[0] + 0.5 * g[1]
    crit = criteria.c_criterion(in_range)
    val = criteria.psi(crit, information.info_M(comp_model, design))
    assert np.isfinite(val) and val > 0
    out_of_range = np.cross(g[0], g[1])  # orthogonal complement direction
    with pytest.raises(SingularInfo):
        criteria.psi(criteria.c_criterion(out_of_range), information.info_M(comp_model, design))


def test_phi_d_singular_raises(mm_model, d_crit):
    one_point = (np.array([500.0]), np.array([1.0]))
    with pytest.raises(SingularInfo):
        criteria.phi(d_crit, mm_model, one_point, 100.0)


def _state_with_info(mm_model, dist, support, counts, rng):
    xs = np.repeat(support, counts)
    ys = models.eta(mm_model, xs) + errors.sample(dist, rng, xs.size)
    return estimation.cluster(xs, ys)


def test_nu_reduces_to_phi_without_history(mm_model, cauchy1, d_crit):
    # a zero-information configuration gives Q = 0 and nu == phi exactly
    xs = np.array([500.0, 500.0])
    ys = models.eta(mm_model, 500.0) + np.array([-1.0, 1.0])
    state = estimation.cluster(xs, ys)
    design = MM_D_DESIGN
    grid = np.linspace(1.0, 2000.0, 101)
    with np.errstate(all="ignore"):
        nus = criteria.nu_many(d_crit, mm_model, cauchy1, state, MM_THETA, 1, grid, design=design)
    phis = criteria.phi_many(d_crit, mm_model, design, grid)
    assert np.max(np.abs(nus - phis)) <= 1e-10


def test_nu_depends_on_info_only_through_q_and_omega(mm_model, cauchy1, d_crit):
    rng = np.random.default_rng(5)
    state = _state_with_info(mm_model, cauchy1, [191.285, 2000.0], [6, 6], rng)
    fits = estimation.fit_clusters(cauchy1, state, warn_multimodal=False)
    ia = np.array([f.obs_info for f in fits])
    # a second state with identical clusters and identical (Q, omega)
    fits_same = [
        estimation.ClusterFit(f.eta_hat, i, f.config) for f, i in zip(fits, ia)
    ]
    x = 700.0
    v1 = criteria.nu(d_crit, mm_model, cauchy1, state, MM_THETA, 1, x,
                     design=MM_D_DESIGN, fits=fits)
    v2 = criteria.nu(d_crit, mm_model, cauchy1, state, MM_THETA, 1, x,
                     design=MM_D_DESIGN, fits=fits_same)
    assert v1 == v2


def test_nu_zero_at_optimal_augmented_support(mm_model, cauchy1, d_crit):
    rng = np.random.default_rng(6)
    state = _state_with_info(mm_model, cauchy1, [300.0, 1200.0], [5, 5], rng)
    fits = estimation.fit_clusters(cauchy1, state, warn_multimodal=False)
    opts = design_solver.SolverOptions(cert_tol=1e-5)
    best = design_solver.solve_augmented(
        mm_model, d_crit, cauchy1, state, MM_THETA, m_next=20, opts=opts, fits=fits
    )
    for x in best.support:
        val = criteria.nu(d_crit, mm_model, cauchy1, state, MM_THETA, 20, float(x),
                          design=best, fits=fits)
        assert val == pytest.approx(0.0, abs=1e-4)


def test_nu_c_criterion_reduction(mm_model, cauchy1):
    crit = criteria.c_criterion([0.0, 1.0])
    xs = np.array([500.0, 500.0])
    ys = models.eta(mm_model, 500.0) + np.array([-1.0, 1.0])
    state = estimation.cluster(xs, ys)
    grid = np.linspace(1.0, 2000.0, 51)
    with np.errstate(all="ignore"):
        nus = criteria.nu_many(crit, mm_model, cauchy1, state, MM_THETA, 1, grid,
                               design=MM_D_DESIGN)
    phis = criteria.phi_many(crit, mm_model, MM_D_DESIGN, grid)
    assert np.max(np.abs(nus - phis)) <= 1e-10
