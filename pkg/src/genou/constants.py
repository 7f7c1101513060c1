"""Monte Carlo estimates of the limit-theory constants of the volatility model.

The block-maxima and increment tail equivalences, the Fréchet limit of
partial maxima and both extremal-index formulas are driven by expectations of
path functionals of the exponent, all of the form

* ``E sup_(0<=s<=h) exp(-alpha*xi_s)``                     (block-sup moment)
* ``E (sup_(0<=s<=a) exp(-alpha*xi_s)
      - sup_(s>=a)   exp(-alpha*xi_s))^+``                 (cluster functional)
* ``E [(integral_0^h exp(-xi_(t-)/2) dL_t)^+]^(2*alpha)``  (increment moment)

For the compound-Poisson family every supremum and integral is event-exact.
For the diffusion families paths live on a grid: grid suprema are biased low,
so each functional is evaluated at step dt and dt/2 on the same Brownian path
and Richardson-extrapolated in sqrt(dt).

Unbounded suprema ``sup_(s>=a)`` are truncated at a horizon where the
sub-root exponent moment has decayed below a tolerance; every truncated
estimate carries a doubled-horizon audit and warns (TruncationWarning) when
the audit shift exceeds one standard error.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from ._mc import MCStats, identity_z, mc_reduce
from ._rng import as_generator, seed_sequence
from .errors import (
    EstimationUnstable,
    EstimationWarning,
    InvalidConfig,
    PreconditionViolated,
    TruncationWarning,
)
from .models import (
    CogarchCPP,
    LevyModel,
    Nelson,
    _gauss_exponent_params,
    find_alpha,
    laplace_exponent,
    padded_event_batch,
)

__all__ = [
    "TheoryConstant",
    "IdentityCheck",
    "truncation_horizon",
    "mc_sup_exponent",
    "frechet_constant",
    "extremal_index_volatility",
    "extremal_index_increments",
    "tail_constant_increments",
    "tail_scale",
    "normalizer_a_n",
    "check_window_scaling_identity",
    "check_first_jump_identity",
    "first_jump_laplace",
    "write_constants_csv",
]

_RICH = 1.0 / (math.sqrt(2.0) - 1.0)  # sqrt(dt)-bias extrapolation weight
_ROOT_TOL = 1e-8


@dataclass
class TheoryConstant:
    """A Monte Carlo estimate of one limit-theory constant."""

    label: str
    value: float
    std_error: float
    n_paths: int
    horizon: float
    dt: float  # 0 for event-exact estimates
    audit: dict = field(default_factory=dict)

    def z_against(self, other: "TheoryConstant") -> float:
        return identity_z((self.value, self.std_error), (other.value, other.std_error))


@dataclass
class IdentityCheck:
    """Two-sided Monte Carlo check of a closed identity."""

    lhs: TheoryConstant
    rhs: TheoryConstant
    z_score: float
    passed: bool


def _require_root(model: LevyModel, alpha: float):
    psi = laplace_exponent(model, alpha)
    if abs(psi) > _ROOT_TOL:
        raise PreconditionViolated(
            f"psi(alpha) = {psi:.3g} != 0; the identity requires the tail-index root"
        )


def _alpha_or_root(model: LevyModel, alpha: float | None) -> float:
    return find_alpha(model) if alpha is None else float(alpha)


def truncation_horizon(model: LevyModel, alpha: float, eps: float = 1e-4) -> float:
    """Horizon T with exp(T * psi(alpha/2)) < eps.

    psi(alpha/2) < 0 by strict convexity when psi(alpha) = 0, so the sub-root
    moment of the exponent decays at that rate and bounds the mass of the
    neglected supremum beyond T.
    """
    psi_half = laplace_exponent(model, alpha / 2.0)
    if psi_half >= 0:
        raise PreconditionViolated("psi(alpha/2) must be negative to truncate the tail supremum")
    return math.log(1.0 / eps) / (-psi_half)


# ---------------------------------------------------------------------------
# windowed supremum engines (chunk level)
# ---------------------------------------------------------------------------


def _window_g_max_cogarch(model: CogarchCPP, windows, m: int, rng) -> np.ndarray:
    """Exact per-path max of g = -xi over each (a, b] window (plus the left
    boundary point).  g decreases between arrivals, so the candidates are the
    value at a and the post-jump values inside the window."""
    tmax = max(b for _, b in windows)
    times, _, zt, mask = padded_event_batch(model, tmax, m, rng)
    out = np.empty((len(windows), m))
    if times.shape[1] == 0:
        for w, (a, _) in enumerate(windows):
            out[w] = -model.c * a
        return out
    czt = np.cumsum(zt, axis=1)
    g_post = -model.c * times + czt
    czt_ext = np.concatenate([np.zeros((m, 1)), czt], axis=1)
    for w, (a, b) in enumerate(windows):
        if a == 0:
            ga = np.zeros(m)
        else:
            cnt = (times <= a).sum(axis=1)
            ga = -model.c * a + np.take_along_axis(czt_ext, cnt[:, None], axis=1)[:, 0]
        sel = mask & (times > a) & (times <= b)
        gev = np.where(sel, g_post, -np.inf).max(axis=1)
        out[w] = np.maximum(ga, gev)
    return out


def _window_g_max_diffusion(
    model, windows, dt: float, m: int, rng, s_block: int = 1024
) -> tuple[np.ndarray, np.ndarray]:
    """Per-path max of g = -xi over window grid points at steps dt/2 (fine)
    and dt (coarse, the even-index subset of the same path)."""
    drift, vol = _gauss_exponent_params(model)
    f = dt / 2.0
    idx = []
    for a, b in windows:
        ia, ib = a / f, b / f
        if abs(ia - round(ia)) > 1e-9 or abs(ib - round(ib)) > 1e-9:
            raise InvalidConfig("window boundaries must be multiples of dt")
        idx.append((int(round(ia)), int(round(ib))))
    n_steps = max(ib for _, ib in idx)
    W = len(windows)
    gf = np.full((W, m), -np.inf)
    gc = np.full((W, m), -np.inf)
    for w, (ia, _) in enumerate(idx):
        if ia == 0:
            gf[w] = 0.0
            gc[w] = 0.0
    g_off = np.zeros(m)
    pos = 0
    sq = vol * math.sqrt(f)
    while pos < n_steps:
        s = min(s_block, n_steps - pos)
        g = -drift * f + sq * rng.standard_normal((m, s))
        np.cumsum(g, axis=1, out=g)
        g += g_off[:, None]
        for w, (ia, ib) in enumerate(idx):
            lo = max(ia, pos + 1)
            hi = min(ib, pos + s)
            if lo > hi:
                continue
            block = g[:, lo - pos - 1 : hi - pos]
            gf[w] = np.maximum(gf[w], block.max(axis=1))
            start = lo if lo % 2 == 0 else lo + 1
            if start <= hi:
                coarse = g[:, start - pos - 1 : hi - pos : 2]
                gc[w] = np.maximum(gc[w], coarse.max(axis=1))
        g_off = g[:, -1].copy()
        pos += s
    return gf, gc


def _window_integrals_cogarch(model: CogarchCPP, h: float, k_windows: int, m: int, rng):
    """Exact J_k = sum over arrivals in ((k-1)h, kh] of exp(-xi_(t-)/2) * z."""
    T = k_windows * h
    times, z, zt, mask = padded_event_batch(model, T, m, rng)
    if times.shape[1] == 0:
        return np.zeros((m, k_windows))
    czt = np.cumsum(zt, axis=1)
    g_pre = -model.c * times + czt - zt  # -xi at the left limit
    contrib = np.where(mask, np.exp(0.5 * g_pre) * z, 0.0)
    wid = np.clip(np.ceil(times / h).astype(int) - 1, 0, k_windows - 1)
    flat = (np.arange(m)[:, None] * k_windows + wid).ravel()
    J = np.bincount(flat, weights=contrib.ravel(), minlength=m * k_windows)
    return J.reshape(m, k_windows)


def _window_integrals_diffusion(model, h: float, k_windows: int, dt: float, m: int, rng):
    """Left-point Euler J_k at steps dt/2 (fine) and dt (coarse) on shared
    Brownian drivers."""
    drift, vol = _gauss_exponent_params(model)
    f = dt / 2.0
    spw = int(round(h / f))
    if abs(spw * f - h) > 1e-9 or spw % 2:
        raise InvalidConfig("h must be an even multiple of dt/2")
    jf = np.empty((m, k_windows))
    jc = np.empty((m, k_windows))
    xi_off = np.zeros(m)
    sq = vol * math.sqrt(f)
    for k in range(k_windows):
        dxi = drift * f + sq * rng.standard_normal((m, spw))
        dw = math.sqrt(f) * rng.standard_normal((m, spw))
        xi = np.cumsum(dxi, axis=1) + xi_off[:, None]
        xi_left = np.empty_like(xi)
        xi_left[:, 0] = xi_off
        xi_left[:, 1:] = xi[:, :-1]
        jf[:, k] = (np.exp(-0.5 * xi_left) * dw).sum(axis=1)
        dw_c = dw[:, 0::2] + dw[:, 1::2]
        xi_left_c = xi_left[:, 0::2]
        jc[:, k] = (np.exp(-0.5 * xi_left_c) * dw_c).sum(axis=1)
        xi_off = xi[:, -1].copy()
    return jf, jc


def _extrapolate(fine: np.ndarray, coarse: np.ndarray) -> np.ndarray:
    return fine + (fine - coarse) * _RICH


# ---------------------------------------------------------------------------
# kernels (module level: they cross process boundaries under workers > 1)
# ---------------------------------------------------------------------------


def _k_sup_windows(args, rng, m):
    """Per-path sup of exp(-alpha*xi) over each window; extrapolated for
    diffusion exponents."""
    model, alpha, windows, dt = args
    if isinstance(model, CogarchCPP):
        g = _window_g_max_cogarch(model, windows, m, rng)
        return {f"w{i}": np.exp(alpha * g[i]) for i in range(len(windows))}
    gf, gc = _window_g_max_diffusion(model, windows, dt, m, rng)
    out = {}
    for i in range(len(windows)):
        out[f"w{i}"] = _extrapolate(np.exp(alpha * gf[i]), np.exp(alpha * gc[i]))
    return out


def _k_cluster_functional(args, rng, m):
    """(sup_(0,a) - sup_(a,a+T))^+ and its doubled-horizon variant, plus the
    head supremum itself (shared-path denominators)."""
    model, alpha, a, T, h_den, dt = args
    windows = [(0.0, a), (a, a + T), (a, a + 2 * T)]
    if h_den is not None:
        windows.append((0.0, h_den))
    if isinstance(model, CogarchCPP):
        g = _window_g_max_cogarch(model, windows, m, rng)
        sups = [np.exp(alpha * g[i]) for i in range(len(windows))]
        out = {
            "num_T": np.maximum(sups[0] - sups[1], 0.0),
            "num_2T": np.maximum(sups[0] - sups[2], 0.0),
        }
        if h_den is not None:
            out["den"] = sups[3]
        return out
    gf, gc = _window_g_max_diffusion(model, windows, dt, m, rng)
    def compose(gmat):
        sups = [np.exp(alpha * gmat[i]) for i in range(len(windows))]
        comp = {
            "num_T": np.maximum(sups[0] - sups[1], 0.0),
            "num_2T": np.maximum(sups[0] - sups[2], 0.0),
        }
        if h_den is not None:
            comp["den"] = sups[3]
        return comp
    fine, coarse = compose(gf), compose(gc)
    return {k: _extrapolate(fine[k], coarse[k]) for k in fine}


def _k_increment_moments(args, rng, m):
    """[(J_1)^+]^(2a), the running max over later windows, and its audit."""
    model, alpha, h, K, dt = args
    if isinstance(model, CogarchCPP):
        J = _window_integrals_cogarch(model, h, 2 * K, m, rng)
        t = np.maximum(J, 0.0) ** (2.0 * alpha)
        out = {"t1": t[:, 0]}
        if K >= 2:
            mK = t[:, 1:K].max(axis=1)
            m2K = t[:, 1:].max(axis=1)
            out["num_K"] = np.maximum(t[:, 0] - mK, 0.0)
            out["num_2K"] = np.maximum(t[:, 0] - m2K, 0.0)
        return out
    jf, jc = _window_integrals_diffusion(model, h, 2 * K, dt, m, rng)
    def compose(J):
        t = np.maximum(J, 0.0) ** (2.0 * alpha)
        comp = {"t1": t[:, 0]}
        if K >= 2:
            comp["num_K"] = np.maximum(t[:, 0] - t[:, 1:K].max(axis=1), 0.0)
            comp["num_2K"] = np.maximum(t[:, 0] - t[:, 1:].max(axis=1), 0.0)
        return comp
    fine, coarse = compose(jf), compose(jc)
    return {k: _extrapolate(fine[k], coarse[k]) for k in fine}


def _k_first_jump_rhs(args, rng, m):
    """(1 - sup_(s>=Gamma_1) exp(-alpha*xi_s))^+ via the strong Markov
    split at the first arrival: an Exp(mu) arrival with one jump, then an
    independent running supremum over [0, T]."""
    model, alpha, T = args
    gamma = rng.exponential(1.0 / model.mu, m)
    z1 = model.jump_law.sample(rng, m)
    xi_g = model.c * gamma - model.jump_log_factors(z1)
    g = _window_g_max_cogarch(model, [(0.0, T)], m, rng)[0]
    sup_fresh = np.exp(alpha * g)
    inner = np.maximum(1.0 - np.exp(-alpha * xi_g) * sup_fresh, 0.0)
    return {"inner": inner}


# ---------------------------------------------------------------------------
# public operations
# ---------------------------------------------------------------------------

_DEFAULT_DT = 1.0 / 64.0


def _snap_up(t: float, dt: float) -> float:
    return math.ceil(t / dt - 1e-9) * dt


def _audit_shift(stats: MCStats, base: str, audited: str, label: str, audit: dict) -> None:
    """Record the doubled-horizon shift and warn if it exceeds one SE."""
    shift = abs(stats.mean(audited) - stats.mean(base))
    se = stats.sem(audited)
    audit["truncation_shift"] = shift
    audit["truncation_se"] = se
    if shift > se:
        warnings.warn(
            f"{label}: doubling the truncation horizon moved the estimate by "
            f"{shift:.3g} (> 1 SE = {se:.3g})",
            TruncationWarning,
            stacklevel=3,
        )


def mc_sup_exponent(
    model: LevyModel,
    alpha: float | None = None,
    h: float = 1.0,
    horizon: float | None = None,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
) -> TheoryConstant:
    """E sup_(0<=s<=h) exp(-alpha*xi_s); >= 1 always (the s = 0 term).

    Event-exact for the compound-Poisson exponent; grid supremum with
    step-halving extrapolation for diffusion exponents.
    """
    alpha = _alpha_or_root(model, alpha)
    if horizon is not None and horizon < h:
        raise InvalidConfig("horizon must cover the window length h")
    exact = isinstance(model, CogarchCPP)
    hh = h if exact else _snap_up(h, dt)
    stats = mc_reduce(_k_sup_windows, (model, alpha, [(0.0, hh)], dt), n_paths, rng, workers)
    return TheoryConstant(
        label=f"sup_exponent[h={h:g}]",
        value=stats.mean("w0"),
        std_error=stats.sem("w0"),
        n_paths=n_paths,
        horizon=hh,
        dt=0.0 if exact else dt,
    )


def frechet_constant(
    model: LevyModel,
    alpha: float | None = None,
    horizon: float | None = None,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
) -> TheoryConstant:
    """E (sup_(0<=s<=1) exp(-alpha*xi_s) - sup_(s>=1) exp(-alpha*xi_s))^+.

    The scale constant of the Fréchet-type limit of normalised running
    maxima of the volatility; also the numerator of the extremal-index
    function at unit window length.
    """
    alpha = _alpha_or_root(model, alpha)
    _require_root(model, alpha)
    exact = isinstance(model, CogarchCPP)
    T = truncation_horizon(model, alpha) if horizon is None else float(horizon)
    if not exact:
        T = _snap_up(T, dt)
    stats = mc_reduce(
        _k_cluster_functional, (model, alpha, 1.0, T, None, dt), n_paths, rng, workers
    )
    audit = {"tail_bound": math.exp(T * laplace_exponent(model, alpha / 2.0))}
    _audit_shift(stats, "num_T", "num_2T", "frechet_constant", audit)
    return TheoryConstant(
        label="frechet_constant",
        value=stats.mean("num_2T"),
        std_error=stats.sem("num_2T"),
        n_paths=n_paths,
        horizon=T,
        dt=0.0 if exact else dt,
        audit=audit,
    )


def extremal_index_volatility(
    model: LevyModel,
    alpha: float | None = None,
    h: float = 1.0,
    horizon: float | None = None,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
) -> TheoryConstant:
    """theta(h): extremal index of the block-maxima sequence at window h.

    Ratio of h times the unit-window cluster functional to the block-sup
    moment at window h, estimated on common paths for variance reduction.
    """
    alpha = _alpha_or_root(model, alpha)
    _require_root(model, alpha)
    exact = isinstance(model, CogarchCPP)
    T = truncation_horizon(model, alpha) if horizon is None else float(horizon)
    hh = h
    if not exact:
        T = _snap_up(T, dt)
        hh = _snap_up(h, dt)
    stats = mc_reduce(
        _k_cluster_functional, (model, alpha, 1.0, T, hh, dt), n_paths, rng, workers
    )
    value, se = stats.ratio("num_2T", "den", scale=hh)
    audit = {
        "numerator": stats.mean("num_2T"),
        "numerator_se": stats.sem("num_2T"),
        "denominator": stats.mean("den"),
        "denominator_se": stats.sem("den"),
        "tail_bound": math.exp(T * laplace_exponent(model, alpha / 2.0)),
    }
    _audit_shift(stats, "num_T", "num_2T", "extremal_index_volatility", audit)
    return TheoryConstant(
        label=f"extremal_index_volatility[h={h:g}]",
        value=value,
        std_error=se,
        n_paths=n_paths,
        horizon=T,
        dt=0.0 if exact else dt,
        audit=audit,
    )


def tail_constant_increments(
    model: LevyModel,
    alpha: float | None = None,
    h: float = 1.0,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
) -> TheoryConstant:
    """E [(integral_0^h exp(-xi_(t-)/2) dL_t)^+]^(2*alpha).

    The proportionality constant between the upper tail of the increments
    and the tail of the squared volatility level.
    """
    alpha = _alpha_or_root(model, alpha)
    exact = isinstance(model, CogarchCPP)
    hh = h if exact else _snap_up(h, dt)
    stats = mc_reduce(_k_increment_moments, (model, alpha, hh, 1, dt), n_paths, rng, workers)
    return TheoryConstant(
        label=f"tail_constant_increments[h={h:g}]",
        value=stats.mean("t1"),
        std_error=stats.sem("t1"),
        n_paths=n_paths,
        horizon=hh,
        dt=0.0 if exact else dt,
    )


def extremal_index_increments(
    model: LevyModel,
    alpha: float | None = None,
    h: float = 1.0,
    k_windows: int = 20,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
) -> TheoryConstant:
    """Extremal index of the increment sequence.

    Ratio of E([J_1^+]^(2a) - max_(2<=k<=K) [J_k^+]^(2a))^+ to
    E[J_1^+]^(2a), with the inner max truncated at K windows and audited at
    2K.
    """
    if k_windows < 2:
        raise InvalidConfig("k_windows must be >= 2")
    alpha = _alpha_or_root(model, alpha)
    _require_root(model, alpha)
    exact = isinstance(model, CogarchCPP)
    hh = h if exact else _snap_up(h, dt)
    stats = mc_reduce(
        _k_increment_moments, (model, alpha, hh, k_windows, dt), n_paths, rng, workers
    )
    value, se = stats.ratio("num_2K", "t1")
    audit = {
        "numerator": stats.mean("num_2K"),
        "denominator": stats.mean("t1"),
        "k_windows": k_windows,
    }
    _audit_shift(stats, "num_K", "num_2K", "extremal_index_increments", audit)
    return TheoryConstant(
        label=f"extremal_index_increments[h={h:g}]",
        value=value,
        std_error=se,
        n_paths=n_paths,
        horizon=2 * k_windows * hh,
        dt=0.0 if exact else dt,
        audit=audit,
    )


def tail_scale(
    model: LevyModel,
    alpha: float | None = None,
    n_sample: int = 1_000_000,
    q: float = 0.999,
    rng=0,
    h: float = 1.0,
    subgrid: int = 16,
) -> TheoryConstant:
    """Scale C of the Pareto-like volatility tail P(V > x) ~ C x^(-alpha).

    Nelson: analytic from the inverse-gamma stationary law,
    C = scale^alpha / (alpha * Gamma(alpha)).  Other families: empirical,
    C_hat = x_q^alpha * (1 - q) at a high quantile of a long stationary
    simulation, gated by a Hill-plateau stability check.
    """
    alpha = _alpha_or_root(model, alpha)
    if isinstance(model, Nelson):
        scale = model.inverse_gamma_scale
        value = scale**alpha / (alpha * math.gamma(alpha))
        return TheoryConstant(
            label="tail_scale", value=value, std_error=0.0, n_paths=0, horizon=0.0, dt=0.0,
            audit={"analytic": True, "inverse_gamma_scale": scale},
        )
    from .simulate import simulate_blocks
    from .stats import hill_profile

    gen = as_generator(np.random.default_rng(seed_sequence(rng, "tail_scale")))
    V = simulate_blocks(model, h, n_sample, 1, gen, subgrid=subgrid)[0][0, 1:]
    ks = np.unique(np.geomspace(64, max(65, n_sample // 20), 24).astype(int))
    profile = hill_profile(V, ks)
    plateau = _hill_plateau(ks, profile)
    if plateau is None:
        raise EstimationUnstable("no plateau in the Hill profile of the simulated tail")
    x_q = float(np.quantile(V, q))
    value = x_q**alpha * (1.0 - q)
    # batch-means SE of the exceedance probability at the frozen threshold
    n_batch = 16
    usable = (len(V) // n_batch) * n_batch
    p_b = (V[:usable] > x_q).reshape(n_batch, -1).mean(axis=1)
    se = x_q**alpha * p_b.std(ddof=1) / math.sqrt(n_batch)
    audit = {"hill_plateau": plateau, "alpha_used": alpha, "quantile": q}
    if abs(plateau - alpha) > 0.25 * alpha:
        warnings.warn(
            f"Hill plateau {plateau:.3g} deviates from alpha {alpha:.3g} by more than 25%",
            EstimationWarning,
            stacklevel=2,
        )
    return TheoryConstant(
        label="tail_scale", value=value, std_error=se, n_paths=n_sample, horizon=n_sample * h,
        dt=0.0 if isinstance(model, CogarchCPP) else h / subgrid, audit=audit,
    )


def _hill_plateau(ks, alphas, window: int = 5, rel_spread: float = 0.15) -> float | None:
    """Median of the first window of Hill estimates whose spread is small."""
    alphas = np.asarray(alphas, dtype=float)
    for i in range(len(alphas) - window + 1):
        seg = alphas[i : i + window]
        mid = float(np.median(seg))
        if mid > 0 and (seg.max() - seg.min()) < rel_spread * mid:
            return mid
    return None


def normalizer_a_n(C: float, alpha: float, n: int) -> float:
    """a_n = (C*n)^(1/alpha): n * P(V > a_n x) -> x^(-alpha) under the
    Pareto-like tail approximation."""
    if C <= 0:
        raise InvalidConfig("tail scale C must be > 0")
    if n < 1:
        raise InvalidConfig("n must be >= 1")
    return (C * n) ** (1.0 / alpha)


def check_window_scaling_identity(
    model: LevyModel,
    alpha: float | None = None,
    h: float = 2.0,
    horizon: float | None = None,
    n_paths: int = 100_000,
    rng=0,
    dt: float = _DEFAULT_DT,
    workers: int = 1,
    share_paths: bool = False,
) -> IdentityCheck:
    """Linearity in h of the cluster functional.

    E(sup_(0,h) - sup_(s>=h))^+ must equal h * E(sup_(0,1) - sup_(s>=1))^+
    whenever psi(alpha) = 0 (it fails otherwise, e.g. for a deterministic
    drift exponent, which this check rejects via PreconditionViolated).  The
    two sides use independent path sets so the z-score is honest;
    ``share_paths`` reuses one set, which collapses z to 0 at h = 1.
    """
    alpha = _alpha_or_root(model, alpha)
    _require_root(model, alpha)
    exact = isinstance(model, CogarchCPP)
    T = truncation_horizon(model, alpha) if horizon is None else float(horizon)
    hh = h
    if not exact:
        T = _snap_up(T, dt)
        hh = _snap_up(h, dt)
    seed_l = seed_sequence(rng, "window-scaling-lhs")
    seed_r = seed_l if share_paths else seed_sequence(rng, "window-scaling-rhs")
    sl = mc_reduce(_k_cluster_functional, (model, alpha, hh, T, None, dt), n_paths, seed_l, workers)
    sr = mc_reduce(_k_cluster_functional, (model, alpha, 1.0, T, None, dt), n_paths, seed_r, workers)
    lhs = TheoryConstant(
        label=f"cluster_functional[h={h:g}]",
        value=sl.mean("num_2T"), std_error=sl.sem("num_2T"),
        n_paths=n_paths, horizon=T, dt=0.0 if exact else dt,
    )
    rhs = TheoryConstant(
        label=f"h*cluster_functional[h=1] (h={h:g})",
        value=h * sr.mean("num_2T"), std_error=h * sr.sem("num_2T"),
        n_paths=n_paths, horizon=T, dt=0.0 if exact else dt,
    )
    z = lhs.z_against(rhs)
    return IdentityCheck(lhs=lhs, rhs=rhs, z_score=z, passed=abs(z) <= 3.0)


def first_jump_laplace(model: CogarchCPP, alpha: float) -> float:
    """E exp(-alpha*c*Gamma_1) = mu / (mu + alpha*c) for Exp(mu) arrivals."""
    return model.mu / (model.mu + alpha * model.c)


def check_first_jump_identity(
    model: CogarchCPP,
    alpha: float | None = None,
    horizon: float | None = None,
    n_paths: int = 100_000,
    rng=0,
    workers: int = 1,
) -> IdentityCheck:
    """First-arrival representation of the unit-window cluster functional.

    For the compound-Poisson family with psi(alpha) = 0 the functional
    E(sup_(0,1) - sup_(s>=1))^+ equals
    mu * (E exp(-alpha*c*Gamma_1))^(-1) * E(1 - sup_(s>=Gamma_1))^+, where
    the arrival transform is analytic: mu/(mu + alpha*c).
    """
    if not isinstance(model, CogarchCPP):
        raise PreconditionViolated("the first-jump identity needs a compound-Poisson driver")
    if model.mu <= 0:
        raise PreconditionViolated("the first-jump identity needs a positive arrival rate")
    alpha = _alpha_or_root(model, alpha)
    _require_root(model, alpha)
    T = truncation_horizon(model, alpha) if horizon is None else float(horizon)
    sl = mc_reduce(
        _k_cluster_functional,
        (model, alpha, 1.0, T, None, _DEFAULT_DT),
        n_paths,
        seed_sequence(rng, "first-jump-lhs"),
        workers,
    )
    sr = mc_reduce(
        _k_first_jump_rhs, (model, alpha, T), n_paths, seed_sequence(rng, "first-jump-rhs"), workers
    )
    scale = model.mu / first_jump_laplace(model, alpha)  # = mu + alpha*c
    lhs = TheoryConstant(
        label="cluster_functional[h=1]",
        value=sl.mean("num_2T"), std_error=sl.sem("num_2T"),
        n_paths=n_paths, horizon=T, dt=0.0,
    )
    rhs = TheoryConstant(
        label="first_jump_representation",
        value=scale * sr.mean("inner"), std_error=scale * sr.sem("inner"),
        n_paths=n_paths, horizon=T, dt=0.0,
        audit={"arrival_laplace": first_jump_laplace(model, alpha)},
    )
    z = lhs.z_against(rhs)
    return IdentityCheck(lhs=lhs, rhs=rhs, z_score=z, passed=abs(z) <= 3.0)


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def write_constants_csv(rows, path: str):
    """(label, value, se, n_paths, horizon, dt, pass) rows; identity checks
    expand into lhs / rhs / z rows."""
    from .simulate import _atomic_write, fmt_float

    lines = ["label,value,se,n_paths,horizon,dt,pass"]
    for row in rows:
        if isinstance(row, IdentityCheck):
            for side in (row.lhs, row.rhs):
                lines.append(_constant_line(side, row.passed))
            lines.append(
                f"z[{row.lhs.label} vs {row.rhs.label}],{fmt_float(row.z_score)},,"
                f"{row.lhs.n_paths},{fmt_float(row.lhs.horizon)},{fmt_float(row.lhs.dt)},{row.passed}"
            )
        else:
            lines.append(_constant_line(row, True))
    _atomic_write(path, "\n".join(lines) + "\n")


def _constant_line(c: TheoryConstant, passed: bool) -> str:
    from .simulate import fmt_float

    return (
        f"{c.label},{fmt_float(c.value)},{fmt_float(c.std_error)},{c.n_paths},"
        f"{fmt_float(c.horizon)},{fmt_float(c.dt)},{passed}"
    )
