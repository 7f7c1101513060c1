"""Acceptance gate: every exit criterion at its stated tolerance.

Each test prints one PASS/FAIL line.  Monte Carlo criteria run as
frozen-seed batteries; tolerances come from the criteria themselves, never
from calibration after the fact.
"""

import json
import math

import numpy as np
import pytest

from genou import (
    BrownianExponent,
    CogarchCPP,
    DeterministicAbs,
    Nelson,
    PreconditionViolated,
    TwoPoint,
    check_first_jump_identity,
    check_window_scaling_identity,
    extremal_index_blocks,
    find_alpha,
    first_jump_laplace,
    frechet_constant,
    hill_estimator,
    integrated_limit_check,
    mc_sup_exponent,
    parse_config,
    partial_maxima_check,
    rate_diagnostic,
    run_experiment,
    sample_acv,
    simulate_skeleton,
    tail_constant_increments,
    tail_ratio,
    extremal_index_volatility,
)


def _report(num: int, passed: bool, detail: str):
    print(f"ACCEPTANCE {num:2d}: {'PASS' if passed else 'FAIL'} - {detail}")
    assert passed, f"criterion {num}: {detail}"


NELSON2 = Nelson(lam=1.0, a=1.0, sigma=math.sqrt(2.0))
COGARCH1 = CogarchCPP(beta=1.0, c=1.0, lambda_g=1.0 / math.e, mu=1.0, jump_law=TwoPoint(1.0))


def test_criterion_01_nelson_root_grid():
    """Tail-index root equals 1 + 2*lam/sigma^2 on a 5x5 parameter grid."""
    worst = 0.0
    for lam in [0.25, 0.5, 1.0, 2.0, 4.0]:
        for sig2 in [0.5, 1.0, 2.0, 4.0, 8.0]:
            model = Nelson(lam=lam, a=1.0, sigma=math.sqrt(sig2))
            worst = max(worst, abs(find_alpha(model) - (1.0 + 2.0 * lam / sig2)))
    _report(1, worst < 1e-10, f"5x5 grid, max |alpha - (1 + 2 lam/sigma^2)| = {worst:.2e}")


def test_criterion_02_cogarch_unit_root():
    """Jump factor 2 with c = mu = 1: the root of 2^s - s - 1 is exactly 1."""
    model = CogarchCPP(beta=1.0, c=1.0, lambda_g=1.0 / math.e, mu=1.0,
                       jump_law=DeterministicAbs(1.0))
    lo, hi = 0.5, 1.5  # independent bisection of 2^s - s - 1
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if 2.0**mid - mid - 1.0 < 0 else (lo, mid)
    oracle = 0.5 * (lo + hi)
    err = abs(find_alpha(model) - 1.0)
    _report(2, err < 1e-10 and abs(oracle - 1.0) < 1e-10,
            f"|alpha - 1| = {err:.2e} (oracle root {oracle:.12f})")


def test_criterion_03_window_scaling_identity():
    """Linearity in h of the cluster functional at psi(alpha) = 0, and the
    deterministic-drift negative control."""
    be = BrownianExponent(m=1.0, sigma=1.0)
    zs = {}
    for h in (0.5, 2.0, 4.0):
        chk = check_window_scaling_identity(be, 2.0, h=h, n_paths=100_000, rng=114)
        zs[h] = chk.z_score
    drift = CogarchCPP(beta=1.0, c=1.0, lambda_g=0.3, mu=0.0, jump_law=TwoPoint(1.0))
    try:
        check_window_scaling_identity(drift, alpha=1.0, h=2.0, n_paths=100, rng=0)
        control = False
    except PreconditionViolated:
        control = True
    ok = all(abs(z) <= 3.0 for z in zs.values()) and control
    _report(3, ok, "z = " + ", ".join(f"{h}: {z:+.2f}" for h, z in zs.items())
            + f"; drift control rejected: {control}")


def test_criterion_04_first_jump_identity():
    """First-arrival representation of the cluster functional (z gate) plus
    the exact arrival transform mu/(mu + alpha c)."""
    chk = check_first_jump_identity(COGARCH1, 1.0, n_paths=100_000, rng=441)
    exact = first_jump_laplace(COGARCH1, 1.0) == 0.5
    ok = abs(chk.z_score) <= 3.0 and exact
    _report(4, ok, f"z = {chk.z_score:+.2f}, arrival transform exact: {exact}")


def test_criterion_05_block_sup_tail_equivalence():
    """P(H > x) / P(V > x) at the 99.5% level vs the block-sup moment."""
    const = mc_sup_exponent(NELSON2, 2.0, h=1.0, n_paths=200_000, rng=551)
    series = simulate_skeleton(NELSON2, 1.0, 1_000_000, 256, 552)
    ratio = tail_ratio(series.H, series.V[1:], q=0.995)
    rel = abs(ratio - const.value) / const.value
    _report(5, rel <= 0.25, f"ratio {ratio:.3f} vs constant {const.value:.3f} ({100 * rel:.1f}%)")


def test_criterion_06_increment_tail_equivalence():
    """P(I > x) / P(V > x^2) at the 99.5% level vs the increment moment."""
    const = tail_constant_increments(COGARCH1, 1.0, h=1.0, n_paths=100_000, rng=661)
    series = simulate_skeleton(COGARCH1, 1.0, 1_000_000, 1, 662)
    ratio = tail_ratio(series.I, series.V[1:], q=0.995, transform="square")
    rel = abs(ratio - const.value) / const.value
    _report(6, rel <= 0.25, f"ratio {ratio:.4f} vs constant {const.value:.4f} ({100 * rel:.1f}%)")


def test_criterion_07_extremal_index_cross_check():
    """Blocks estimator on simulated block maxima vs the Monte Carlo
    extremal-index function, within 3 combined SEs; both strictly inside
    (0, 1): the maxima really do cluster."""
    theory = extremal_index_volatility(NELSON2, 2.0, h=1.0, n_paths=120_000, rng=771)
    n = 6_000_000
    series = simulate_skeleton(NELSON2, 1.0, n, 32, 772)
    u = float(np.quantile(series.H, 1.0 - 400.0 / n))
    blocks = extremal_index_blocks(series.H, u, block_len=100)
    comb = math.hypot(blocks.se, theory.std_error)
    z = (blocks.theta_hat - theory.value) / comb
    inside = 0.0 < blocks.theta_hat < 1.0 and 0.0 < theory.value < 1.0
    _report(7, abs(z) <= 3.0 and inside,
            f"blocks {blocks.theta_hat:.4f} vs theory {theory.value:.4f} (z = {z:+.2f}), "
            f"strictly in (0,1): {inside}")


def test_criterion_08_frechet_partial_maxima():
    """Normalised running maxima against exp(-kappa x^-alpha): KS at the
    largest horizon below 0.05."""
    kappa = frechet_constant(NELSON2, 2.0, n_paths=150_000, rng=881).value
    chk = partial_maxima_check(
        NELSON2, 2.0, 0.5, n_list=[64, 256, 512], n_reps=2000, rng=882,
        kappa=kappa, subgrid=512,
    )
    ks = chk.ks_distance
    shrinking = ks[-1] <= ks[0] + 0.01
    _report(8, ks[-1] <= 0.05 and shrinking,
            f"KS over horizons {chk.sizes}: {np.round(ks, 4)} (kappa = {kappa:.3f})")


def test_criterion_09_acv_rate_regimes():
    """Dispersion-rate slopes across the three volatility ACV regimes plus
    the i.i.d. Gaussian harness calibration."""
    results = []
    reg = rate_diagnostic(Nelson(lam=1.0, a=1.0, sigma=1.0), "acv_v", 1,
                          [200, 800, 3200, 25600], 200, rng=991, subgrid=8)
    results.append(("alpha=3", reg.slope, -1.0 / 3.0, 0.12))
    reg = rate_diagnostic(Nelson(lam=2.5, a=1.0, sigma=1.0), "acv_v", 1,
                          [200, 800, 3200, 25600], 200, rng=991, subgrid=8)
    results.append(("alpha=6", reg.slope, -0.5, 0.10))
    reg = rate_diagnostic(Nelson(lam=0.25, a=1.0, sigma=1.0), "acf_v", 1,
                          [1600, 6400, 25600, 204800], 200, rng=991, subgrid=8)
    results.append(("alpha=1.5", reg.slope, 0.0, 0.12))
    reg = rate_diagnostic("iid_gaussian", "acv_v", 1,
                          [128, 512, 2048, 12800], 300, rng=15)
    results.append(("iid calibration", reg.slope, -0.5, 0.05))
    ok = all(abs(s - e) <= tol for _, s, e, tol in results)
    _report(9, ok, "; ".join(f"{n}: {s:+.3f} (target {e:+.3f} +- {t})"
                             for n, s, e, t in results))


def test_criterion_10_integrated_limit_regimes():
    """Integrated-process dichotomy: normality gates above the CLT boundary,
    heavy-tail scaling below it."""
    rep = integrated_limit_check(NELSON2, 2.0, [64, 512], 2000, rng=1001, subgrid=8)
    d = rep.detail
    normal_ok = (
        abs(d["skewness"]) <= 0.2
        and abs(d["excess_kurtosis"]) <= 0.5
        and d["ks_normal"] <= 0.05
    )
    target = 0.4
    factor = ((1.0 + target) / 1.0) ** (1.0 / target)
    cog04 = CogarchCPP(beta=1.0, c=1.0, lambda_g=(factor - 1.0) / math.e, mu=1.0,
                       jump_law=TwoPoint(1.0))
    rep2 = integrated_limit_check(cog04, 0.4, [256, 512, 1024, 2048], 6000, rng=1002)
    d2 = rep2.detail
    stable_ok = (
        abs(d2["hill_of_sums"] - 0.8) <= 0.2 * 0.8
        and abs(d2["spread_slope"] - 1.25) <= 0.15
    )
    _report(10, normal_ok and stable_ok,
            f"normal(t=512): skew {d['skewness']:+.3f}, exkurt {d['excess_kurtosis']:+.3f}, "
            f"KS {d['ks_normal']:.3f}; stable(a=0.4): hill {d2['hill_of_sums']:.3f}, "
            f"slope {d2['spread_slope']:.3f}")


def test_criterion_11_estimator_oracles():
    """Bit-level ACV against the definition, exact Hill scale invariance,
    and the 2-dependent moving-max extremal index."""
    rng = np.random.default_rng(111)
    x = rng.standard_normal(50) * 2.0
    est = sample_acv(x, max_lag=10)
    acv_ok = True
    for l in range(11):
        products = np.array([x[k] * x[k + l] for k in range(50 - l)])
        acv_ok &= est.gamma_hat[l] == np.sum(products) / 50

    y = rng.pareto(2.0, 4000) + 1.0
    base = hill_estimator(y, 150).alpha_hat
    hill_ok = (
        hill_estimator(256.0 * y, 150).alpha_hat == base
        and hill_estimator(y / 32.0, 150).alpha_hat == base
    )

    z = 1.0 / -np.log(rng.random(1_000_001))
    mm = np.maximum(z[:-1], z[1:])
    u = float(np.quantile(mm, 0.999))
    mm_est = extremal_index_blocks(mm, u, block_len=20)
    mm_ok = abs(mm_est.theta_hat - 0.5) <= 3.0 * mm_est.se
    _report(11, acv_ok and hill_ok and mm_ok,
            f"ACV bit-exact: {acv_ok}; Hill scale-invariant: {hill_ok}; "
            f"moving-max theta {mm_est.theta_hat:.3f} +- {mm_est.se:.3f}")


def test_criterion_12_worker_reproducibility(tmp_path):
    """Same config and seed, different worker counts: byte-identical CSVs."""
    doc = {
        "model": {"family": "cogarch", "beta": 1.0, "c": 1.0,
                  "lambda_g": 1.0 / math.e, "mu": 1.0,
                  "jump_law": {"law": "two_point", "z": 1.0}},
        "tasks": ["verify_identities", "acf_rates"],
        "sizes": [100, 400, 1600, 10000],
        "reps": 200,
        "seed": 2024,
        "n_paths": 10000,
        "subgrid": 4,
        "output_dir": str(tmp_path / "out"),
    }
    cfg = parse_config(json.dumps(doc))
    run_experiment(cfg, workers=1, output_dir=str(tmp_path / "w1"))
    run_experiment(cfg, workers=2, output_dir=str(tmp_path / "w2"))
    same = True
    for name in ("report.csv", "constants.csv"):
        a = (tmp_path / "w1" / name).read_bytes()
        b = (tmp_path / "w2" / name).read_bytes()
        same &= a == b
    _report(12, same, "report.csv and constants.csv byte-identical for workers 1 vs 2")
