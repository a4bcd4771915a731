"""Acceptance gate: every release criterion at its stated tolerance.

Each test prints one PASS/FAIL line. The Monte-Carlo criteria use fixed,
pre-registered seeds so the whole gate is reproducible bit for bit.
"""

import itertools

import numpy as np
import pytest

from rsdesign import (
    adaptive,
    criteria,
    design_solver as ds,
    errors,
    estimation,
    information,
    models,
    sim,
)

from conftest import fd_grad_eta, fd_hess_eta, random_model

BASE_SEED = 20240901


def report(criterion_id: str, passed: bool, detail: str = ""):
    print(f"{'PASS' if passed else 'FAIL'} {criterion_id}: {detail}")
    assert passed, f"{criterion_id}: {detail}"


# --------------------------------------------------------------------------
# 1. reference designs
# --------------------------------------------------------------------------
BENCHMARKS = [
    # (name, model, criterion, support, weights, support_tol)
    ("mm-D",
     models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000)),
     criteria.d_criterion(), [191.285, 2000.0], [0.5, 0.5], 0.5),
    ("mm-c",
     models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000)),
     criteria.c_criterion([0, 1]), [139.157, 2000.0], [1 / np.sqrt(2), 1 - 1 / np.sqrt(2)], 0.5),
    # the published decay designs are the exact optima at decay rate 0.0140
    # (the data-set table quotes 0.01539, under which the optimum moves to
    # x = 64.75; the published numbers are taken as the ground truth)
    ("decay-D",
     models.ModelSpec("exp-decay", (1.215, 0.0140), (0, 500)),
     criteria.d_criterion(), [70.972, 500.0], [0.5, 0.5], 0.5),
    ("decay-c",
     models.ModelSpec("exp-decay", (1.215, 0.0140), (0, 500)),
     criteria.c_criterion([0, 1]), [54.551, 500.0], [0.652, 0.348], 0.5),
    # likewise the compartmental design corresponds to the unrounded
    # parameter estimates (21.8, 0.05884, 4.298)
    ("compartmental-D",
     models.ModelSpec("compartmental", (21.8, 0.05884, 4.298), (0, 48)),
     criteria.d_criterion(), [0.2288, 1.3886, 18.4168], [1 / 3, 1 / 3, 1 / 3], 0.01),
]


@pytest.mark.acceptance
def test_criterion_1_flod_reproduction():
    details = []
    ok = True
    for name, model, crit, support, weights, tol in BENCHMARKS:
        design = ds.flod_solve(model, crit)
        cert = ds.certify(model, crit, None, design)
        good = (
            design.d == len(support)
            and np.all(np.abs(design.support - np.asarray(support)) <= tol)
            and np.all(np.abs(design.weights - np.asarray(weights)) <= 0.01)
            and cert.passed
            and cert.min_phi >= -1e-3
        )
        ok &= good
        details.append(f"{name}{'' if good else '(FAILED)'}")
    report("criterion 1 (reference designs)", ok, ", ".join(details))


# --------------------------------------------------------------------------
# 2. curvature constants
# --------------------------------------------------------------------------
@pytest.mark.acceptance
def test_criterion_2_curvature_constants():
    vals = (
        errors.curvature_sq(errors.cauchy(1.0)),
        errors.curvature_sq(errors.exp_power(1.0, 4.0)),
        errors.curvature_sq(errors.q_gaussian(1.0, 1.5)),
    )
    targets = (2.50, 1.18, 0.63)
    ok = all(abs(v - t) <= 0.01 for v, t in zip(vals, targets))
    report(
        "criterion 2 (curvature constants)", ok,
        "gamma^2 = " + ", ".join(f"{v:.4f} (target {t})" for v, t in zip(vals, targets)),
    )


# --------------------------------------------------------------------------
# 3. order of approximation of the conditional information
# --------------------------------------------------------------------------
def _slope(ns, means):
    return float(np.polyfit(np.log(ns), np.log(means), 1)[0])


@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_3_order_of_approximation():
    dist = errors.cauchy(1.0)
    mu = errors.unit_info(dist)
    ns = [10, 20, 40, 80, 160]
    reps = 2000
    rng = np.random.default_rng(BASE_SEED)

    # scalar version: one support point
    m_ih, m_fh = [], []
    for n in ns:
        d_ih, d_fh = [], []
        for _ in range(reps):
            y = errors.sample(dist, rng, n)
            fit = estimation.fit_location(dist, y, warn_multimodal=False)
            h = information.cond_info_oracle(dist, fit.config)
            d_ih.append(abs(fit.obs_info - h) / n)
            d_fh.append(abs(n * mu - h) / n)
        m_ih.append(np.mean(d_ih))
        m_fh.append(np.mean(d_fh))
    s_ih, s_fh = _slope(ns, m_ih), _slope(ns, m_fh)

    # matrix version: two repeated support points of the reference design
    model = models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000))
    support = np.array([191.285, 2000.0])
    grads = models.grad_eta(model, support)
    etas = np.atleast_1d(models.eta(model, support))
    m_jh, m_fh2 = [], []
    for n in ns:
        counts = [n // 2, n - n // 2]
        xs = np.repeat(support, counts)
        mean_etas = np.repeat(etas, counts)
        f_mat = information.info_F(model, dist, (support, np.array([0.5, 0.5])), n).matrix
        d_jh, d_fh = [], []
        for _ in range(reps):
            ys = mean_etas + errors.sample(dist, rng, n)
            state = estimation.cluster(xs, ys)
            fits = estimation.fit_clusters(dist, state, warn_multimodal=False)
            j_mat = information.info_J_hybrid(model, dist, state, None, fits).matrix
            h_mat = sum(
                information.cond_info_oracle(dist, f.config) * np.outer(g, g)
                for f, g in zip(fits, grads)
            )
            d_jh.append(np.linalg.norm(j_mat - h_mat) / n)
            d_fh.append(np.linalg.norm(f_mat - h_mat) / n)
        m_jh.append(np.mean(d_jh))
        m_fh2.append(np.mean(d_fh))
    s_jh, s_fh2 = _slope(ns, m_jh), _slope(ns, m_fh2)

    ok = (
        -1.15 <= s_ih <= -0.85 and -0.65 <= s_fh <= -0.35
        and -1.15 <= s_jh <= -0.85 and -0.65 <= s_fh2 <= -0.35
    )
    report(
        "criterion 3 (approximation orders)", ok,
        f"scalar slopes {s_ih:.3f}/{s_fh:.3f}, matrix slopes {s_jh:.3f}/{s_fh2:.3f} "
        "(bands -1+-0.15 and -0.5+-0.15)",
    )


# --------------------------------------------------------------------------
# 4. equivalence-theorem fixed point on random instances
# --------------------------------------------------------------------------
@pytest.mark.acceptance
def test_criterion_4_equivalence_fixed_point():
    rng = np.random.default_rng(BASE_SEED + 4)
    failures = []
    for k in range(20):
        model = random_model(rng)
        crit = criteria.d_criterion()
        if model.p == 2 and k % 2 == 1:
            crit = criteria.c_criterion([0.0, 1.0])
        design = ds.flod_solve(model, crit)
        cert = ds.certify(model, crit, None, design)
        if not (cert.passed and np.max(np.abs(cert.phi_at_support)) <= 1e-3):
            failures.append((model.family, crit.kind))
    report(
        "criterion 4 (random-instance certification)", not failures,
        f"20 instances, failures: {failures or 'none'}",
    )


# --------------------------------------------------------------------------
# 5. reduction law
# --------------------------------------------------------------------------
@pytest.mark.acceptance
def test_criterion_5_reduction_law():
    model = models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000))
    dist = errors.cauchy(1.39)
    crit = criteria.d_criterion()
    force_equal = lambda dist_, resid: np.ones_like(resid)
    mismatches = 0
    for seed in range(10):
        key = np.random.SeedSequence((BASE_SEED, seed, 25))
        aod = adaptive.run_experiment(
            model, dist, crit, adaptive.aod_strategy(), model.theta, 25,
            np.random.default_rng(key),
        )
        rsd = adaptive.run_experiment(
            model, dist, crit, adaptive.rsd_strategy(obs_info_fn=force_equal),
            model.theta, 25, np.random.default_rng(key),
        )
        if aod.x_path != rsd.x_path:
            mismatches += 1
    report(
        "criterion 5 (reduction law)", mismatches == 0,
        f"10 seeds, x-paths bit-identical except {mismatches}",
    )


# --------------------------------------------------------------------------
# 6. look-ahead mixture identity
# --------------------------------------------------------------------------
@pytest.mark.acceptance
def test_criterion_6_lookahead_identity():
    model = models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000))
    dist = errors.cauchy(1.0)
    rng = np.random.default_rng(BASE_SEED + 6)
    worst = 0.0
    for _ in range(1000):
        d = int(rng.integers(2, 5))
        support = np.sort(rng.uniform(50.0, 2000.0, d))
        counts = rng.integers(1, 6, d)
        xs = np.repeat(support, counts)
        ys = models.eta(model, xs) + errors.sample(dist, rng, xs.size)
        state = estimation.cluster(xs, ys)
        x = float(rng.uniform(1.0, 2000.0))
        gap = information.that_mixture_gap(model, dist, state, None, x, m_next=1)
        worst = max(worst, gap)
    report(
        "criterion 6 (look-ahead mixture identity)", worst <= 1e-10,
        f"worst gap over 1000 random states: {worst:.2e}",
    )


# --------------------------------------------------------------------------
# 7. directional reproduction of the efficiency study
# --------------------------------------------------------------------------
@pytest.mark.acceptance
@pytest.mark.slow
def test_criterion_7_efficiency_directions():
    model = models.ModelSpec("michaelis-menten", (43.95, 236.53), (0, 2000))
    config = sim.SimConfig(
        model=model,
        dist=errors.cauchy(1.39),
        criterion=criteria.d_criterion(),
        n_grid=[13, 20, 30, 40, 50, 60],
        replicates=500,
        base_seed=BASE_SEED,
        workers=2,
    )
    rep = sim.run_study(config)

    large_n = [30, 40, 50, 60]
    a_vals = {n: (rep.value(n, "rsd", "RJ"), rep.mc_se(n, "rsd", "RJ")) for n in large_n}
    a_ok = all(v - 1.96 * se > 1.0 for v, se in a_vals.values())
    b_ok = all(rep.value(n, "rsd", "RJ") > rep.value(n, "aod", "RJ") for n in large_n)
    c_ok = rep.value(60, "rsd", "RMSE") >= rep.value(60, "aod", "RMSE")
    rm_aod, rm_rsd = rep.value(60, "aod", "RM"), rep.value(60, "rsd", "RM")
    d_ok = 0.9 <= rm_aod <= 1.1 and 0.9 <= rm_rsd <= 1.1

    a_txt = ", ".join(f"{v:.3f}+-{se:.3f}" for v, se in a_vals.values())
    b_gaps = ", ".join(
        f"{rep.value(n, 'rsd', 'RJ') - rep.value(n, 'aod', 'RJ'):+.3f}" for n in large_n
    )
    rmse_rsd, rmse_aod = rep.value(60, "rsd", "RMSE"), rep.value(60, "aod", "RMSE")
    detail = (
        f"(a) RJ_rsd at n>=30: {a_txt} {'ok' if a_ok else 'FAILED'}; "
        f"(b) RJ_rsd - RJ_aod: {b_gaps} {'ok' if b_ok else 'FAILED'}; "
        f"(c) RMSE n=60 rsd {rmse_rsd:.3f} vs aod {rmse_aod:.3f} {'ok' if c_ok else 'FAILED'}; "
        f"(d) RM n=60 aod {rm_aod:.3f}, rsd {rm_rsd:.3f} {'ok' if d_ok else 'FAILED'}"
    )
    report("criterion 7 (efficiency directions)", a_ok and b_ok and c_ok and d_ok, detail)


# --------------------------------------------------------------------------
# 8. apportionment
# --------------------------------------------------------------------------
def _adams_valid(w, c):
    w = np.asarray(w, float)
    c = np.asarray(c, float)
    mask = w > 0
    lo = np.max(w[mask] / c[mask])
    hi = np.min(np.where(c[mask] > 1, w[mask] / np.maximum(c[mask] - 1, 1e-300), np.inf))
    return lo <= hi * (1 + 1e-12)


@pytest.mark.acceptance
def test_criterion_8_apportionment():
    rng = np.random.default_rng(BASE_SEED + 8)
    sum_ok = True
    for _ in range(10_000):
        d = int(rng.integers(2, 6))
        w = rng.dirichlet(np.ones(d))
        n = int(rng.integers(d, 80))
        counts = ds.adams_round(ds.Design(np.arange(1.0, d + 1), w), n).counts
        sum_ok &= counts.sum() == n
    enum_ok = True
    for _ in range(150):
        d = int(rng.integers(2, 5))
        w = rng.dirichlet(np.ones(d))
        n = int(rng.integers(d, 31))
        ours = tuple(ds.adams_round(ds.Design(np.arange(1.0, d + 1), w), n).counts)
        valid = {
            combo for combo in itertools.product(range(1, n + 1), repeat=d)
            if sum(combo) == n and _adams_valid(w, combo)
        }
        enum_ok &= ours in valid
    report(
        "criterion 8 (apportionment)", sum_ok and enum_ok,
        "10000 random totals exact, 150 cases match the divisor-interval enumeration",
    )


# --------------------------------------------------------------------------
# 9. numerical hygiene
# --------------------------------------------------------------------------
@pytest.mark.acceptance
def test_criterion_9_numerical_hygiene():
    rng = np.random.default_rng(BASE_SEED + 9)
    checks = {}

    worst = 0.0
    for _ in range(300):
        model = random_model(rng)
        lo, hi = model.design_space
        x = rng.uniform(lo + 1e-3 * (hi - lo), hi)
        g, g_fd = models.grad_eta(model, x), fd_grad_eta(model, x, model.theta)
        h, h_fd = models.hess_eta(model, x), fd_hess_eta(model, x, model.theta)
        worst = max(worst, np.max(np.abs(g - g_fd)) / max(np.max(np.abs(g)), 1e-12))
        worst = max(worst, np.max(np.abs(h - h_fd)) / max(np.max(np.abs(h)), 1e-9))
    checks["model derivatives"] = worst <= 1e-5

    dists = [errors.cauchy(1.0), errors.exp_power(1.0, 4.0), errors.q_gaussian(1.0, 1.5)]
    ident_ok = True
    for dist in dists:
        def fn(e, dist=dist):
            f = errors.pdf(dist, e)
            l1 = errors.logpdf_deriv(dist, e, 1)
            l2 = errors.logpdf_deriv(dist, e, 2)
            return np.stack([f, l1 * f, -l2 * f, l1 * l1 * f])

        from rsdesign import quadrature
        total, score, neg_l2, sq = quadrature.integrate_tan_map(
            fn, scale=dist.sigma, abs_tol=1e-12, rel_tol=1e-12
        )
        ident_ok &= abs(total - 1) <= 1e-8 and abs(score) <= 1e-8 and abs(neg_l2 - sq) <= 1e-8
    checks["density identities"] = ident_ok

    checks["curvature scale invariance"] = all(
        abs(errors.curvature_sq(d) - errors.curvature_sq(
            errors.ErrorDist(d.family, 7.0, d.shape))) <= 1e-8
        for d in dists
    )

    equi_ok = True
    dist = errors.cauchy(1.0)
    for _ in range(50):
        y = errors.sample(dist, rng, int(rng.integers(3, 25)))
        c = float(rng.uniform(-20, 20))
        base = estimation.fit_location(dist, y, warn_multimodal=False)
        shifted = estimation.fit_location(dist, y + c, warn_multimodal=False)
        equi_ok &= abs(shifted.eta_hat - base.eta_hat - c) <= 1e-8
        equi_ok &= abs(shifted.obs_info - base.obs_info) <= 1e-8 * max(1, base.obs_info)
    checks["location equivariance"] = equi_ok

    ok = all(checks.values())
    report(
        "criterion 9 (numerical hygiene)", ok,
        "; ".join(f"{k}: {'ok' if v else 'FAILED'}" for k, v in checks.items()),
    )
