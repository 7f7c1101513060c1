"""Estimators and convergence diagnostics for heavy-tailed stationary series.

Tail index (Hill), empirical tail ratios, extremal-index estimators (blocks
and runs), exceedance cluster sizes, the non-centred sample autocovariance,
and three replication harnesses matching the limit regimes of the theory:
dispersion-rate regressions for the sample autocovariance, the Fréchet limit
of normalised partial maxima, and the normal/stable dichotomy of normalised
integrated increments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as sps

from ._rng import as_generator, derive_rng
from .errors import (
    BoundaryAlpha,
    InsufficientData,
    InvalidConfig,
    NoExceedances,
    NonPositiveData,
    TooFewExceedances,
)
from .models import LevyModel, symmetric_driver
from .simulate import simulate_blocks

__all__ = [
    "TailEstimate",
    "ExtremalIndexEstimate",
    "AcfEstimate",
    "ClusterDistribution",
    "RateRegression",
    "MaximaCheck",
    "IntegratedLimitReport",
    "hill_estimator",
    "hill_profile",
    "tail_ratio",
    "extremal_index_blocks",
    "extremal_index_runs",
    "cluster_size_distribution",
    "sample_acv",
    "rate_diagnostic",
    "frechet_cdf",
    "partial_maxima_check",
    "integrated_limit_check",
]


# ---------------------------------------------------------------------------
# result containers
# ---------------------------------------------------------------------------


@dataclass
class TailEstimate:
    alpha_hat: float
    k_order: int
    se: float
    threshold: float


@dataclass
class ExtremalIndexEstimate:
    theta_hat: float
    method: str  # "blocks" | "runs"
    threshold: float
    block_len: int
    se: float


@dataclass
class AcfEstimate:
    lags: list
    gamma_hat: np.ndarray
    rho_hat: np.ndarray
    n: int


@dataclass
class ClusterDistribution:
    sizes: dict  # size -> count
    mean_size: float
    n_clusters: int
    n_exceedances: int

    @property
    def se_mean(self) -> float:
        if self.n_clusters < 2:
            return math.inf
        vals = np.repeat(
            np.fromiter(self.sizes.keys(), dtype=float),
            np.fromiter(self.sizes.values(), dtype=int),
        )
        return float(vals.std(ddof=1) / math.sqrt(self.n_clusters))


@dataclass
class RateRegression:
    sizes: list
    dispersion: np.ndarray  # IQR per size
    slope: float
    slope_se: float
    ci_low: float
    ci_high: float


@dataclass
class MaximaCheck:
    sizes: list
    ks_distance: np.ndarray
    kappa: float
    alpha: float


@dataclass
class IntegratedLimitReport:
    regime: str  # "normal" (alpha > 1) | "stable" (alpha < 0.5)
    alpha: float
    symmetric_increments: bool
    detail: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# tail index
# ---------------------------------------------------------------------------


def default_k_order(n: int) -> int:
    return max(2, int(n**0.6))


def hill_estimator(data, k_order: int | None = None) -> TailEstimate:
    """Hill tail-index estimate from the k largest order statistics.

    alpha_hat = 1 / mean(log(X_(i) / X_(k+1)), i = 1..k) on descending order
    statistics; se = alpha_hat / sqrt(k).  Ratios are formed before taking
    logs, so a pure scale change of the data leaves the estimate unchanged.
    """
    x = np.asarray(data, dtype=float)
    if np.any(x <= 0):
        raise NonPositiveData("Hill estimator needs strictly positive data")
    if k_order is None:
        k_order = default_k_order(x.size)
    if k_order < 2:
        raise InsufficientData("k_order must be >= 2")
    if x.size < k_order + 1:
        raise InsufficientData(f"need at least k_order+1 = {k_order + 1} observations")
    top = np.sort(x)[-(k_order + 1) :]
    threshold = top[0]
    mean_log = float(np.mean(np.log(top[1:] / threshold)))
    if mean_log <= 0:
        raise InsufficientData("degenerate upper order statistics (all ties)")
    alpha_hat = 1.0 / mean_log
    return TailEstimate(
        alpha_hat=alpha_hat, k_order=k_order, se=alpha_hat / math.sqrt(k_order), threshold=threshold
    )


def hill_profile(data, k_grid) -> np.ndarray:
    """Hill estimates along a grid of order counts (for plots and plateaus)."""
    x = np.sort(np.asarray(data, dtype=float))
    if np.any(x <= 0):
        raise NonPositiveData("Hill profile needs strictly positive data")
    logs = np.log(x)
    out = np.empty(len(k_grid))
    for j, k in enumerate(k_grid):
        k = int(k)
        if k < 2 or k + 1 > x.size:
            out[j] = np.nan
            continue
        mean_log = logs[-k:].mean() - logs[-k - 1]
        out[j] = 1.0 / mean_log if mean_log > 0 else np.nan
    return out


def tail_ratio(data_num, data_den, q: float = 0.995, transform: str = "identity") -> float:
    """P(num > x_q) / P(den > t(x_q)) with x_q the q-quantile of the numerator.

    ``transform="square"`` compares against the denominator tail at x_q^2
    (the increment-vs-squared-level comparison).
    """
    num = np.asarray(data_num, dtype=float)
    den = np.asarray(data_den, dtype=float)
    if transform not in ("identity", "square"):
        raise InvalidConfig("transform must be 'identity' or 'square'")
    x_q = float(np.quantile(num, q))
    n_exc = int((num > x_q).sum())
    thr = x_q * x_q if transform == "square" else x_q
    d_exc = int((den > thr).sum())
    if n_exc < 200 or d_exc < 200:
        raise TooFewExceedances(
            f"tail ratio at q={q} leaves {n_exc} numerator / {d_exc} denominator exceedances (< 200)"
        )
    return (n_exc / num.size) / (d_exc / den.size)


# ---------------------------------------------------------------------------
# extremal index and clusters
# ---------------------------------------------------------------------------


def _default_threshold(x: np.ndarray) -> float:
    return float(np.quantile(x, 0.98))


def extremal_index_blocks(
    data,
    threshold: float | None = None,
    block_len: int | None = None,
    n_boot: int = 200,
    seed: int = 0,
) -> ExtremalIndexEstimate:
    """Blocks estimator: (#blocks with an exceedance) / (#exceedances).

    The reciprocal of the extremal index is the mean exceedance-cluster
    size, so theta_hat is clipped into [0, 1].  SE by block bootstrap.
    """
    x = np.asarray(data, dtype=float)
    threshold = _default_threshold(x) if threshold is None else float(threshold)
    block_len = int(math.ceil(math.sqrt(x.size))) if block_len is None else int(block_len)
    exc = x > threshold
    total = int(exc.sum())
    if total == 0:
        raise NoExceedances(f"no observations above threshold {threshold:g}")
    n_blocks = x.size // block_len
    if n_blocks < 1:
        raise InsufficientData("series shorter than one block")
    blocks = exc[: n_blocks * block_len].reshape(n_blocks, block_len)
    hits = blocks.any(axis=1)
    exc_per_block = blocks.sum(axis=1)
    used_total = int(exc_per_block.sum())
    if used_total == 0:
        raise NoExceedances("all exceedances fall in the trailing partial block")
    theta = min(1.0, max(0.0, float(hits.sum()) / used_total))
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        pick = rng.integers(0, n_blocks, n_blocks)
        tot = exc_per_block[pick].sum()
        boot[b] = min(1.0, hits[pick].sum() / tot) if tot > 0 else np.nan
    se = float(np.nanstd(boot, ddof=1))
    return ExtremalIndexEstimate(
        theta_hat=theta, method="blocks", threshold=threshold, block_len=block_len, se=se
    )


def _cluster_sizes(exc: np.ndarray, run_gap) -> list[int]:
    idx = np.flatnonzero(exc)
    if idx.size == 0:
        return []
    if not math.isfinite(run_gap):
        return [int(idx.size)]
    gaps = np.diff(idx)
    breaks = np.flatnonzero(gaps > run_gap)  # >= run_gap sub-threshold points between
    sizes = np.diff(np.concatenate([[-1], breaks, [idx.size - 1]]))
    return [int(s) for s in sizes]


def cluster_size_distribution(data, threshold: float, run_gap=None) -> ClusterDistribution:
    """Histogram of exceedance-cluster sizes.

    Clusters are maximal groups of exceedances separated by at least
    ``run_gap`` consecutive sub-threshold observations (default: ceil(sqrt(n)),
    matching the blocks-estimator granularity).  ``run_gap = inf`` merges
    everything into a single cluster.
    """
    x = np.asarray(data, dtype=float)
    if run_gap is None:
        run_gap = int(math.ceil(math.sqrt(x.size)))
    exc = x > threshold
    total = int(exc.sum())
    if total == 0:
        raise NoExceedances(f"no observations above threshold {threshold:g}")
    sizes = _cluster_sizes(exc, run_gap)
    hist: dict[int, int] = {}
    for s in sizes:
        hist[s] = hist.get(s, 0) + 1
    return ClusterDistribution(
        sizes=hist,
        mean_size=float(np.mean(sizes)),
        n_clusters=len(sizes),
        n_exceedances=total,
    )


def extremal_index_runs(
    data,
    threshold: float | None = None,
    run_gap=None,
    n_boot: int = 200,
    seed: int = 0,
) -> ExtremalIndexEstimate:
    """Runs estimator: #clusters / #exceedances = 1 / mean cluster size."""
    x = np.asarray(data, dtype=float)
    threshold = _default_threshold(x) if threshold is None else float(threshold)
    if run_gap is None:
        run_gap = int(math.ceil(math.sqrt(x.size)))
    dist = cluster_size_distribution(x, threshold, run_gap)
    theta = min(1.0, dist.n_clusters / dist.n_exceedances)
    sizes = np.repeat(
        np.fromiter(dist.sizes.keys(), dtype=float), np.fromiter(dist.sizes.values(), dtype=int)
    )
    rng = np.random.default_rng(seed)
    boot = np.empty(n_boot)
    for b in range(n_boot):
        pick = sizes[rng.integers(0, sizes.size, sizes.size)]
        boot[b] = min(1.0, pick.size / pick.sum())
    se = float(boot.std(ddof=1))
    return ExtremalIndexEstimate(
        theta_hat=theta, method="runs", threshold=threshold, block_len=int(run_gap) if math.isfinite(run_gap) else -1, se=se
    )


# ---------------------------------------------------------------------------
# sample autocovariance
# ---------------------------------------------------------------------------


def sample_acv(data, max_lag: int, mean_correct: bool = False) -> AcfEstimate:
    """Non-centred sample autocovariance gamma(l) = (1/n) sum x_k x_(k+l).

    This is deliberately NOT mean-corrected by default: the limit regimes are
    stated for the non-centred estimator, and mean correction does not change
    them (available behind ``mean_correct``).
    """
    x = np.asarray(data, dtype=float)
    n = x.size
    if max_lag >= n / 2:
        raise InvalidConfig("max_lag must be below n/2")
    if mean_correct:
        x = x - x.mean()
    lags = list(range(max_lag + 1))
    gamma = np.empty(max_lag + 1)
    for l in lags:
        gamma[l] = np.sum(x[: n - l] * x[l:]) / n
    rho = gamma / gamma[0]
    return AcfEstimate(lags=lags, gamma_hat=gamma, rho_hat=rho, n=n)


# ---------------------------------------------------------------------------
# replication harnesses
# ---------------------------------------------------------------------------


def _series_batch(model, statistic: str, n: int, n_reps: int, rng, h: float, subgrid: int):
    """Replicated stationary series for the requested statistic."""
    if isinstance(model, str):
        if model != "iid_gaussian":
            raise InvalidConfig(f"unknown synthetic model '{model}'")
        return as_generator(rng).standard_normal((n_reps, n))
    V, _, I = simulate_blocks(model, h, n, n_reps, rng, subgrid=subgrid)
    if statistic.endswith("_v"):
        return V[:, 1:]
    return I


# replication cell size: fixed so that results never depend on worker count
_REP_CELL = 100


def _rate_cell(job):
    model, statistic, lag, n, rep_lo, m, seed, h, subgrid = job
    series = _series_batch(
        model, statistic, n, m, derive_rng(seed, "rate", n, rep_lo), h, subgrid
    )
    g0 = np.sum(series * series, axis=1) / n
    g = g0 if lag == 0 else np.sum(series[:, :-lag] * series[:, lag:], axis=1) / n
    return g / g0 if statistic.startswith("acf") else g


def rate_diagnostic(
    model,
    statistic: str,
    lag: int,
    n_list,
    n_reps: int,
    rng=0,
    h: float = 1.0,
    subgrid: int = 8,
    workers: int = 1,
) -> RateRegression:
    """Log-log regression of replication dispersion of the sample ACV/ACF.

    For each n, ``n_reps`` independent stationary series are simulated and
    the IQR of gamma_n(lag) - gamma_ref (resp. rho_n) across replications is
    regressed on n, where gamma_ref is the mean over the largest-n batch.
    IQR rather than variance: the sampling fluctuations are themselves
    heavy-tailed in the stable regimes, where the variance need not exist.
    Expected slopes: 2/alpha - 1 (volatility, alpha in (2,4)), -1/2 in the
    CLT regimes, and ~0 in the inconsistent regimes where the ratio
    statistic has a nondegenerate random limit.

    ``model`` may be "iid_gaussian" for harness calibration (slope -1/2).
    """
    from ._mc import parallel_map

    if statistic not in ("acv_v", "acf_v", "acv_i", "acf_i"):
        raise InvalidConfig("statistic must be one of acv_v, acf_v, acv_i, acf_i")
    n_list = sorted(int(n) for n in n_list)
    if len(n_list) < 4:
        raise InvalidConfig("need at least 4 series lengths")
    if n_list[-1] < 100 * n_list[0]:
        raise InvalidConfig("series lengths must span at least two decades")
    if n_reps < 200:
        raise InvalidConfig("need n_reps >= 200")
    if lag < 0 or lag >= n_list[0] // 2:
        raise InvalidConfig("lag out of range for the smallest series")
    if isinstance(rng, np.random.Generator):
        rng = int(rng.integers(0, 2**63 - 1))

    jobs = []
    for n in n_list:
        for lo in range(0, n_reps, _REP_CELL):
            m = min(_REP_CELL, n_reps - lo)
            jobs.append((model, statistic, lag, n, lo, m, rng, h, subgrid))
    cells = parallel_map(_rate_cell, jobs, workers)

    stats_by_n = []
    pos = 0
    for n in n_list:
        k = math.ceil(n_reps / _REP_CELL)
        stats_by_n.append(np.concatenate(cells[pos : pos + k]))
        pos += k

    gamma_ref = float(np.mean(stats_by_n[-1]))
    iqr = np.array(
        [float(np.subtract(*np.percentile(g - gamma_ref, [75, 25]))) for g in stats_by_n]
    )
    if np.any(iqr <= 0):
        raise InvalidConfig("degenerate dispersion: increase n_reps")
    slope, se = _ols_slope(np.log(n_list), np.log(iqr))
    return RateRegression(
        sizes=n_list,
        dispersion=iqr,
        slope=slope,
        slope_se=se,
        ci_low=slope - 1.96 * se,
        ci_high=slope + 1.96 * se,
    )


def _ols_slope(x: np.ndarray, y: np.ndarray) -> tuple[float, float]:
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xc = x - x.mean()
    slope = float(np.sum(xc * y) / np.sum(xc * xc))
    resid = y - (y.mean() + slope * xc)
    dof = max(1, x.size - 2)
    se = math.sqrt(float(np.sum(resid**2)) / dof / float(np.sum(xc * xc)))
    return slope, se


def frechet_cdf(x, kappa: float, alpha: float):
    """exp(-kappa * x^(-alpha)) for x > 0, 0 otherwise."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    pos = x > 0
    out[pos] = np.exp(-kappa * x[pos] ** (-alpha))
    return out


def partial_maxima_check(
    model: LevyModel,
    alpha: float,
    C: float,
    n_list,
    n_reps: int,
    rng=0,
    kappa: float | None = None,
    h: float = 1.0,
    subgrid: int = 32,
) -> MaximaCheck:
    """KS distance of normalised running maxima against the Fréchet-type limit.

    For each horizon n, ``n_reps`` values of M(n)/a_n are simulated
    (M(n) the running supremum of the volatility over [0, n], a_n =
    (C*n)^(1/alpha)) and compared with the CDF exp(-kappa*x^(-alpha)).  The
    distances should fall (or plateau at the sampling floor) as n grows.
    """
    from .constants import frechet_constant, normalizer_a_n

    if kappa is None:
        kappa = frechet_constant(model, alpha, rng=derive_rng(rng, "kappa")).value
    n_list = sorted(int(n) for n in n_list)
    ks = np.empty(len(n_list))
    for j, n in enumerate(n_list):
        windows = int(round(n / h))
        _, H, _ = simulate_blocks(
            model, h, windows, n_reps, derive_rng(rng, "maxima", n), subgrid=subgrid
        )
        m_n = H.max(axis=1) / normalizer_a_n(C, alpha, n)
        ks[j] = float(sps.kstest(m_n, lambda x: frechet_cdf(x, kappa, alpha)).statistic)
    return MaximaCheck(sizes=n_list, ks_distance=ks, kappa=kappa, alpha=alpha)


def integrated_limit_check(
    model: LevyModel,
    alpha: float,
    t_list,
    n_reps: int,
    rng=0,
    subgrid: int = 8,
    h: float = 1.0,
) -> IntegratedLimitReport:
    """Normal/stable dichotomy of the normalised integrated process.

    alpha > 1: t^(-1/2) * (I*_t - mean) should pass normality gates
    (skewness, excess kurtosis, KS against a fitted normal) at the largest t.
    alpha < 0.5: I*_t scales like t^(1/(2*alpha)); the report carries the
    Hill index of the normalised sums (target 2*alpha) and the slope of
    log-IQR(I*_t) against log t (target 1/(2*alpha)).  Boundary indices
    within 0.05 of {0.5, 1} are rejected.
    """
    for b in (0.5, 1.0):
        if abs(alpha - b) <= 0.05:
            raise BoundaryAlpha(f"alpha = {alpha:g} is within 0.05 of the boundary {b:g}")
    if not (alpha < 0.5 or alpha > 1.0):
        raise BoundaryAlpha(f"alpha = {alpha:g} lies in the excluded band (0.5, 1)")
    t_list = sorted(float(t) for t in t_list)
    windows = [int(round(t / h)) for t in t_list]
    if any(abs(w * h - t) > 1e-9 or w < 1 for w, t in zip(windows, t_list)):
        raise InvalidConfig("t_list entries must be positive multiples of h")

    _, _, I = simulate_blocks(
        model, h, windows[-1], n_reps, derive_rng(rng, "integrated"), subgrid=subgrid
    )
    cum = np.cumsum(I, axis=1)
    sums = {t: cum[:, w - 1] for t, w in zip(t_list, windows)}
    detail: dict = {"t_list": t_list}

    if alpha > 1.0:
        t_big = t_list[-1]
        x = sums[t_big] / math.sqrt(t_big)
        x = x - x.mean()
        sd = x.std(ddof=1)
        detail["skewness"] = float(sps.skew(x))
        detail["excess_kurtosis"] = float(sps.kurtosis(x))
        detail["ks_normal"] = float(sps.kstest(x / sd, "norm").statistic)
        regime = "normal"
    else:
        t_big = t_list[-1]
        norm = np.abs(sums[t_big]) / t_big ** (1.0 / (2.0 * alpha))
        est = hill_estimator(norm[norm > 0], k_order=max(10, int(n_reps**0.6)))
        detail["hill_of_sums"] = est.alpha_hat
        detail["hill_target"] = 2.0 * alpha
        iqr = np.array(
            [float(np.subtract(*np.percentile(sums[t], [75, 25]))) for t in t_list]
        )
        slope, se = _ols_slope(np.log(t_list), np.log(iqr))
        detail["spread_slope"] = slope
        detail["spread_slope_se"] = se
        detail["slope_target"] = 1.0 / (2.0 * alpha)
        regime = "stable"

    return IntegratedLimitReport(
        regime=regime,
        alpha=alpha,
        symmetric_increments=symmetric_driver(model),
        detail=detail,
    )
