import math

import numpy as np
import pytest
from scipy import stats as sps

import genou.simulate as gsim
from genou import (
    CogarchCPP,
    InvalidConfig,
    Nelson,
    TwoPoint,
    default_burn_in,
    find_alpha,
    hill_estimator,
    read_series_csv,
    recurrence_coeff_batch,
    sample_acv,
    sample_recurrence_coeffs,
    simulate_blocks,
    simulate_integrated,
    simulate_skeleton,
    stationary_init,
    write_series_csv,
)
from conftest import assert_close


# ---------------------------------------------------------------------------
# recurrence coefficients
# ---------------------------------------------------------------------------


def test_recurrence_deterministic_exponent(drift_only):
    # no arrivals: A = exp(-c h), B = beta (1 - exp(-c h)) / c, exactly
    rc = sample_recurrence_coeffs(drift_only, 1.5, 7)
    assert rc.A == pytest.approx(math.exp(-1.5), abs=1e-15)
    assert rc.B == pytest.approx(1.0 * (1 - math.exp(-1.5)) / 1.0, abs=1e-15)


@pytest.mark.parametrize("fixture", ["cogarch1", "nelson2"])
def test_recurrence_mean_A_alpha_is_one(fixture, request):
    # E A^alpha = exp(h psi(alpha)) = 1 at the root
    model = request.getfixturevalue(fixture)
    alpha = find_alpha(model)
    A, _ = recurrence_coeff_batch(model, 1.0, 100000, 17)
    vals = A**alpha
    se = vals.std(ddof=1) / math.sqrt(vals.size)
    assert abs(vals.mean() - 1.0) <= 3 * se


def test_recurrence_short_window(cogarch1):
    rc = sample_recurrence_coeffs(cogarch1, 1e-8, 3)
    assert abs(rc.A - 1.0) < 1e-6 and rc.B < 1e-6


def test_recurrence_batch_exact_vs_bruteforce(cogarch1, monkeypatch):
    # pin the arrivals and recompute (A, B) with a slow per-event loop
    times = np.array([[0.2, 0.9], [0.5, 1.0]])
    z = np.array([[1.0, -1.0], [1.0, 0.0]])
    mask = np.array([[True, True], [True, False]])
    zt = cogarch1.jump_log_factors(z) * mask

    def fake_events(model, T, n_paths, rng):
        return times, z, zt, mask

    monkeypatch.setattr(gsim, "padded_event_batch", fake_events)
    A, B = recurrence_coeff_batch(cogarch1, 1.0, 2, 0)
    c, beta = cogarch1.c, cogarch1.beta
    for p in range(2):
        ev = [(t, lf) for t, lf, mk in zip(times[p], zt[p], mask[p]) if mk]
        xi_end = c * 1.0 - sum(lf for _, lf in ev)
        integral = 0.0
        t_prev, xi_prev = 0.0, 0.0
        for t, lf in ev:
            integral += math.exp(xi_prev) * (math.exp(c * (t - t_prev)) - 1.0) / c
            xi_prev = xi_prev + c * (t - t_prev) - lf
            t_prev = t
        integral += math.exp(xi_prev) * (math.exp(c * (1.0 - t_prev)) - 1.0) / c
        assert_close(A[p], math.exp(-xi_end), rel=1e-12, msg=f"A path {p}")
        assert_close(B[p], math.exp(-xi_end) * beta * integral, rel=1e-12, msg=f"B path {p}")


# ---------------------------------------------------------------------------
# stationary start
# ---------------------------------------------------------------------------


def test_stationary_mean_nelson(nelson2):
    draws = stationary_init(nelson2, 29, size=100000)
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    # inverse-gamma mean: scale / (alpha - 1) = 1
    assert abs(draws.mean() - 1.0) <= 3 * se


def test_stationary_tail_index_nelson(nelson2):
    draws = stationary_init(nelson2, 31, size=1_000_000)
    est = hill_estimator(draws, k_order=int(draws.size**0.6))
    assert_close(est.alpha_hat, 2.0, rel=0.10, msg="Hill on exact stationary draws")


def test_stationary_law_vs_euler_sde(nelson2):
    # independent oracle: direct Euler-Maruyama on dV = lam (a - V) dt + sigma V dW,
    # terminal values of many paths vs exact inverse-gamma draws (KS at 1%)
    rng = np.random.default_rng(4711)
    n, dt, t_end = 4000, 0.004, 24.0
    steps = int(t_end / dt)
    v = np.full(n, nelson2.a)
    for _ in range(steps):
        dw = math.sqrt(dt) * rng.standard_normal(n)
        v = v + nelson2.lam * (nelson2.a - v) * dt + nelson2.sigma * v * dw
    assert (v > 0).all()
    exact = stationary_init(nelson2, 4712, size=n)
    p = sps.ks_2samp(v, exact).pvalue
    assert p >= 0.01, f"stationary law disagrees with the SDE oracle (p = {p:.4f})"


def test_stationary_deterministic(nelson2, cogarch1):
    for model in (nelson2, cogarch1):
        assert stationary_init(model, 99) == stationary_init(model, 99)


def test_default_burn_in_values(nelson2, cogarch1):
    # contraction rate -psi(alpha/2): 30 / 0.08578 ~ 350 windows
    assert default_burn_in(cogarch1, 1.0) == 350
    assert default_burn_in(nelson2, 1.0) in (30, 31)  # -psi(1) = 1 up to rounding


# ---------------------------------------------------------------------------
# skeleton: exactness, closed forms, structure
# ---------------------------------------------------------------------------


def test_cogarch_subgrid_is_ignored(cogarch1):
    a = simulate_skeleton(cogarch1, 1.0, 400, 1, 42)
    b = simulate_skeleton(cogarch1, 1.0, 400, 64, 42)
    assert np.array_equal(a.V, b.V) and np.array_equal(a.H, b.H) and np.array_equal(a.I, b.I)


def test_skeleton_positivity_and_sup_bound(cogarch1, nelson2):
    for model, sub in ((cogarch1, 1), (nelson2, 8)):
        s = simulate_skeleton(model, 1.0, 2000, sub, 5)
        assert (s.V > 0).all()
        assert (s.H >= np.maximum(s.V[:-1], s.V[1:]) - 1e-12).all()
        assert len(s.V) == len(s.H) + 1 == len(s.I) + 1


def test_skeleton_deterministic(cogarch1):
    a = simulate_skeleton(cogarch1, 1.0, 300, 1, 123)
    b = simulate_skeleton(cogarch1, 1.0, 300, 1, 123)
    assert np.array_equal(a.V, b.V) and np.array_equal(a.I, b.I)


def test_cogarch_no_jump_blocks_closed_form(drift_only):
    s = simulate_skeleton(drift_only, 1.0, 20, 1, 7)
    v = s.V[0]
    for k in range(20):
        v_next = math.exp(-1.0) * v + 1.0 * (1 - math.exp(-1.0))
        assert s.V[k + 1] == pytest.approx(v_next, rel=1e-12)
        assert s.I[k] == 0.0
        assert s.H[k] == pytest.approx(max(v, v_next), rel=1e-12)
        v = v_next


def test_zero_subordinator_pure_decay():
    model = CogarchCPP(beta=0.0, c=1.0, lambda_g=0.0, mu=0.0, jump_law=TwoPoint(1.0))
    V, H, I = simulate_blocks(model, 1.0, 10, 1, 3, v0=np.array([5.0]), burn_in=0)
    expect = 5.0 * np.exp(-np.arange(11, dtype=float))
    assert np.allclose(V[0], expect, rtol=1e-12)
    assert np.all(I == 0.0)


def test_nelson_zero_level_loglinear_increments():
    # a = 0: V_t = exp(-xi_t) V_0, so log-increments of V are exact Gaussian.
    # Short windows keep the decaying path inside float range.
    model = Nelson(lam=1.0, a=0.0, sigma=math.sqrt(2.0))
    h = 0.01
    V, _, _ = simulate_blocks(model, h, 20000, 1, 11, subgrid=4, v0=np.array([1.0]), burn_in=0)
    inc = np.diff(np.log(V[0]))
    drift = -(model.sigma**2 / 2 + model.lam) * h
    se_m = inc.std(ddof=1) / math.sqrt(inc.size)
    assert abs(inc.mean() - drift) <= 3 * se_m
    var = inc.var(ddof=1)
    assert abs(var - model.sigma**2 * h) <= 3 * var * math.sqrt(2.0 / (inc.size - 1))


def test_cogarch_engine_vs_bruteforce_event_loop(monkeypatch):
    # pin the arrivals, then recompute V/H/I with a slow per-event scan and a
    # dense-grid supremum search
    model = CogarchCPP(beta=0.8, c=0.7, lambda_g=0.4, mu=0.5, jump_law=TwoPoint(1.3))
    times = np.array([[0.3, 1.7, 1.95], [2.5, 3.0, 3.0]])
    z = np.array([[1.3, -1.3, 1.3], [-1.3, 0.0, 0.0]])
    mask = np.array([[True, True, True], [True, False, False]])
    zt = model.jump_log_factors(z) * mask

    def fake_events(mdl, T, n_paths, rng):
        assert T == 3.0 and n_paths == 2
        return times, z, zt, mask

    monkeypatch.setattr(gsim, "padded_event_batch", fake_events)
    v0 = np.array([1.5, 0.4])
    V, H, I = simulate_blocks(model, 1.0, 3, 2, 0, v0=v0, burn_in=0)

    c, beta, lvl = model.c, model.beta, model.beta / model.c
    factor = 1.0 + model.kappa * 1.3**2
    for p in range(2):
        ev = [(t, zz) for t, zz, mk in zip(times[p], z[p], mask[p]) if mk]
        v = v0[p]
        t_prev = 0.0
        checkpoints = sorted(set([1.0, 2.0, 3.0] + [t for t, _ in ev]))
        v_at, i_acc = {0.0: v}, {1: 0.0, 2: 0.0, 3: 0.0}
        sup = {1: v0[p], 2: -np.inf, 3: -np.inf}
        for t in checkpoints:
            grid = np.linspace(t_prev, t, 4001)
            seg = (v - lvl) * np.exp(-c * (grid - t_prev)) + lvl
            for w in (1, 2, 3):
                in_w = (grid >= w - 1) & (grid <= w)
                if in_w.any():
                    sup[w] = max(sup[w], seg[in_w].max())
            v = (v - lvl) * math.exp(-c * (t - t_prev)) + lvl
            if any(abs(t - te) < 1e-12 for te, _ in ev):
                zz = next(zz for te, zz in ev if abs(t - te) < 1e-12)
                w = int(math.ceil(t))
                i_acc[w] += math.sqrt(v) * zz
                v = v * factor
                sup[int(math.ceil(t))] = max(sup[int(math.ceil(t))], v)
            v_at[t] = v
            t_prev = t
        for w in (1, 2, 3):
            sup[w] = max(sup[w], v_at.get(float(w), -np.inf))
            assert_close(V[p, w], v_at[float(w)], rel=1e-10, msg=f"V path {p} window {w}")
            assert_close(I[p, w - 1], i_acc[w], rel=1e-10, msg=f"I path {p} window {w}")
            assert_close(H[p, w - 1], sup[w], rel=1e-6, msg=f"H path {p} window {w}")


def test_invalid_skeleton_config(cogarch1):
    with pytest.raises(InvalidConfig):
        simulate_skeleton(cogarch1, 1.0, 0, 1, 0)
    with pytest.raises(InvalidConfig):
        simulate_skeleton(cogarch1, -1.0, 10, 1, 0)
    with pytest.raises(InvalidConfig):
        simulate_skeleton(cogarch1, 1.0, 10, 0, 0)


# ---------------------------------------------------------------------------
# discretisation and stationarity diagnostics
# ---------------------------------------------------------------------------


def test_nelson_refinement_ks_decreases(nelson2):
    # one window from an exact stationary start: the law of V_h approaches the
    # stationary law as the sub-grid refines (one-sample KS against it)
    alpha, scale = nelson2.alpha_closed_form, nelson2.inverse_gamma_scale
    dist = sps.invgamma(alpha, scale=scale)
    ks = []
    for level, sub in enumerate([1, 2, 4]):
        V, _, _ = simulate_blocks(nelson2, 1.0, 1, 10000, 1000 + level, subgrid=sub)
        ks.append(sps.kstest(V[:, 1], dist.cdf).statistic)
    assert ks[0] > ks[1] > ks[2], f"KS not decreasing: {ks}"
    assert ks[2] < 0.05


def test_stationarity_two_halves(nelson2):
    s = simulate_skeleton(nelson2, 1.0, 40000, 8, 71)
    v = s.V[1:][::5]  # thin to weaken dependence
    half = v.size // 2
    p = sps.ks_2samp(v[:half], v[half:]).pvalue
    assert p >= 0.01


def test_block_coefficients_uncorrelated(cogarch1):
    # beta = 0 makes V_(k+1)/V_k = A_k exactly; consecutive A's are i.i.d.
    # (short windows keep the decaying path inside float range)
    model = CogarchCPP(beta=0.0, c=1.0, lambda_g=cogarch1.lambda_g, mu=1.0,
                       jump_law=cogarch1.jump_law)
    V, _, _ = simulate_blocks(model, 0.05, 20000, 1, 13, v0=np.array([1.0]), burn_in=0)
    la = np.diff(np.log(V[0]))  # log A_k per window
    r = np.corrcoef(la[:-1], la[1:])[0, 1]
    assert abs(r) <= 3.0 / math.sqrt(la.size - 1)


# ---------------------------------------------------------------------------
# integrated process
# ---------------------------------------------------------------------------


def test_integrated_zero_rate(drift_only):
    out = simulate_integrated(drift_only, [1.0, 2.0, 4.0], 4, 3)
    assert np.array_equal(out, np.zeros(3))


def test_integrated_monotone_grid_required(cogarch1):
    with pytest.raises(InvalidConfig):
        simulate_integrated(cogarch1, [0.0, 1.0], 4, 3)
    with pytest.raises(InvalidConfig):
        simulate_integrated(cogarch1, [2.0, 1.0], 4, 3)


def test_integrated_sign_uncorrelated(cogarch1):
    # martingale increments with a symmetric driver: signs are white noise
    _, _, I = simulate_blocks(cogarch1, 1.0, 20000, 1, 37)
    s = np.sign(I[0][np.abs(I[0]) > 0])
    est = sample_acv(s, 1)
    assert abs(est.rho_hat[1]) <= 3.0 / math.sqrt(s.size)


def test_integrated_variance_isometry(nelson2):
    # Var(I*_h) = E(V) * h for a unit-rate Brownian integrator
    h = 0.25
    _, _, I = simulate_blocks(nelson2, h, 1, 50000, 53, subgrid=16)
    x = I[:, 0]
    var = x.var(ddof=1)
    m4 = np.mean((x - x.mean()) ** 4)
    se_var = math.sqrt(max(m4 - var**2, 0.0) / x.size)
    assert abs(var - h * 1.0) <= 3 * se_var


# ---------------------------------------------------------------------------
# serialisation
# ---------------------------------------------------------------------------


def test_series_csv_roundtrip(tmp_path, cogarch1):
    s = simulate_skeleton(cogarch1, 0.5, 50, 1, 9)
    path = str(tmp_path / "series.csv")
    write_series_csv(s, path)
    back = read_series_csv(path)
    assert np.array_equal(back.V, s.V)
    assert np.array_equal(back.H, s.H)
    assert np.array_equal(back.I, s.I)
    assert back.h == s.h and back.seed == s.seed and back.burn_in == s.burn_in
    assert back.model_id == s.model_id and back.left_limits == s.left_limits
    text = open(path).read()
    assert text.startswith("# model=") and "# model_hash=" in text and "k,V,H,I" in text
