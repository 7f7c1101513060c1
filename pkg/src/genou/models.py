"""Parametric families for the driving triple (exponent, subordinator, integrator).

Each family fixes a Lévy triple (xi, eta, L) driving the positive volatility
process ``V_t = exp(-xi_t) * (integral_0^t exp(xi_s) d(eta_s) + V_0)`` and the
integrated process ``I*_t = integral_0^t sqrt(V_{s-}) dL_s``:

* ``Nelson``            -- mean-reverting diffusion volatility;
                           xi_t = -sigma*W1_t + (sigma^2/2 + lam)*t,
                           eta_t = lam*a*t, L = W2 independent of W1.
* ``CogarchCPP``        -- continuous-time GARCH(1,1) driven by a compound
                           Poisson process; xi_t = c*t - sum of
                           log(1 + lambda_g*e^c*Z_k^2) over jumps, eta_t =
                           beta*t, and L is the compound Poisson process
                           itself (xi and L are dependent).
* ``BrownianExponent``  -- xi_t = sigma*W_t + m*t with a deterministic
                           subordinator and an independent Brownian L; a
                           tractable test model for generic exponent
                           functionals.

The Laplace exponent ``psi(v) = log E exp(-v*xi_1)`` is available in closed
form for each family, its unique positive root alpha is the tail index of
the stationary volatility, and moment-based sufficient conditions for a
stationary heavy-tailed version are checked analytically.
"""

from __future__ import annotations

import hashlib
import math
from dataclasses import dataclass, field
from typing import Union

import numpy as np

from .errors import DomainError, InvalidConfig, NoPositiveRoot, NotStationaryHeavyTail
from ._rng import as_generator

__all__ = [
    "TwoPoint",
    "Gaussian",
    "DeterministicAbs",
    "JumpLaw",
    "Nelson",
    "CogarchCPP",
    "BrownianExponent",
    "LevyModel",
    "ConditionReport",
    "EventPath",
    "GridPath",
    "laplace_exponent",
    "mean_exponent",
    "find_alpha",
    "check_conditions",
    "simulate_xi_events",
    "simulate_xi_grid",
    "symmetric_driver",
    "model_id",
    "model_hash",
]

# Gauss-Hermite rule reused for Gaussian jump-law integrals (probabilists'
# weights recovered by the sqrt(2)/sqrt(pi) rescale below).
_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite.hermgauss(160)


# ---------------------------------------------------------------------------
# jump laws
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TwoPoint:
    """Jumps of magnitude z with random sign (+z or -z with prob 1/2)."""

    z: float

    def __post_init__(self):
        if self.z <= 0:
            raise InvalidConfig("TwoPoint jump magnitude must be > 0")

    max_moment_order = math.inf
    symmetric = True

    def abs_moment(self, p: float) -> float:
        return self.z**p

    def squared_factor_moment(self, v: float, kappa: float) -> float:
        """E[(1 + kappa*Z^2)^v]; Z^2 is deterministic here."""
        return (1.0 + kappa * self.z**2) ** v

    def log_factor_mean(self, kappa: float) -> float:
        """E[log(1 + kappa*Z^2)]."""
        return math.log1p(kappa * self.z**2)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        signs = rng.integers(0, 2, size=size) * 2 - 1
        return self.z * signs.astype(float)


@dataclass(frozen=True)
class Gaussian:
    """Centred normal jumps with standard deviation sd."""

    sd: float

    def __post_init__(self):
        if self.sd <= 0:
            raise InvalidConfig("Gaussian jump sd must be > 0")

    max_moment_order = math.inf
    symmetric = True

    def abs_moment(self, p: float) -> float:
        # E|Z|^p = sd^p * 2^(p/2) * Gamma((p+1)/2) / sqrt(pi)
        return self.sd**p * 2.0 ** (p / 2.0) * math.gamma((p + 1.0) / 2.0) / math.sqrt(math.pi)

    def squared_factor_moment(self, v: float, kappa: float) -> float:
        zs = math.sqrt(2.0) * self.sd * _GH_NODES
        vals = (1.0 + kappa * zs**2) ** v
        return float(np.sum(_GH_WEIGHTS * vals) / math.sqrt(math.pi))

    def log_factor_mean(self, kappa: float) -> float:
        zs = math.sqrt(2.0) * self.sd * _GH_NODES
        vals = np.log1p(kappa * zs**2)
        return float(np.sum(_GH_WEIGHTS * vals) / math.sqrt(math.pi))

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return self.sd * rng.standard_normal(size)


@dataclass(frozen=True)
class DeterministicAbs:
    """Always jumps by +z."""

    z: float

    def __post_init__(self):
        if self.z <= 0:
            raise InvalidConfig("DeterministicAbs jump magnitude must be > 0")

    max_moment_order = math.inf
    symmetric = False

    def abs_moment(self, p: float) -> float:
        return self.z**p

    def squared_factor_moment(self, v: float, kappa: float) -> float:
        return (1.0 + kappa * self.z**2) ** v

    def log_factor_mean(self, kappa: float) -> float:
        return math.log1p(kappa * self.z**2)

    def sample(self, rng: np.random.Generator, size) -> np.ndarray:
        return np.full(size, self.z, dtype=float)


JumpLaw = Union[TwoPoint, Gaussian, DeterministicAbs]


# ---------------------------------------------------------------------------
# model families
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Nelson:
    """Diffusion volatility dV = lam*(a - V)dt + sigma*V dW1, returns dI* = sqrt(V) dW2.

    a = 0 is allowed as a degenerate control (no subordinator: V is a pure
    exponential functional of the exponent).
    """

    lam: float
    a: float
    sigma: float

    def __post_init__(self):
        if self.lam <= 0 or self.a < 0 or self.sigma <= 0:
            raise InvalidConfig("Nelson needs lam > 0, a >= 0, sigma > 0")

    @property
    def alpha_closed_form(self) -> float:
        """Tail index 1 + 2*lam/sigma^2 of the stationary volatility."""
        return 1.0 + 2.0 * self.lam / self.sigma**2

    @property
    def inverse_gamma_scale(self) -> float:
        """Scale of the inverse-gamma stationary law, 2*lam*a/sigma^2."""
        return 2.0 * self.lam * self.a / self.sigma**2


@dataclass(frozen=True)
class CogarchCPP:
    """COGARCH(1,1) volatility driven by a compound Poisson process.

    Degenerate controls are allowed: mu = 0 gives the deterministic exponent
    xi_t = c*t (no arrivals at all), beta = 0 removes the subordinator so V
    is a pure exponential functional of the exponent.
    """

    beta: float
    c: float
    lambda_g: float
    mu: float
    jump_law: JumpLaw

    def __post_init__(self):
        if self.beta < 0 or self.c <= 0:
            raise InvalidConfig("CogarchCPP requires beta >= 0 and c > 0")
        if self.lambda_g < 0:
            raise InvalidConfig("CogarchCPP feedback lambda_g must be >= 0")
        if self.mu < 0:
            raise InvalidConfig("CogarchCPP jump rate mu must be >= 0")

    @property
    def kappa(self) -> float:
        """Multiplier kappa = lambda_g * e^c in the squared-jump factor 1 + kappa*Z^2."""
        return self.lambda_g * math.exp(self.c)

    def jump_log_factors(self, z: np.ndarray) -> np.ndarray:
        """log(1 + kappa*z^2): the downward jumps of the exponent."""
        return np.log1p(self.kappa * np.asarray(z, dtype=float) ** 2)


@dataclass(frozen=True)
class BrownianExponent:
    """xi_t = sigma*W_t + m*t; eta_t = eta_rate*t; L an independent Brownian motion."""

    m: float
    sigma: float
    eta_rate: float = 0.0

    def __post_init__(self):
        if self.sigma <= 0:
            raise InvalidConfig("BrownianExponent sigma must be > 0")
        if self.eta_rate < 0:
            raise InvalidConfig("BrownianExponent eta_rate must be >= 0")


LevyModel = Union[Nelson, CogarchCPP, BrownianExponent]


def _gauss_exponent_params(model: LevyModel) -> tuple[float, float]:
    """(drift, volatility) of the Gaussian exponent families."""
    if isinstance(model, Nelson):
        return model.sigma**2 / 2.0 + model.lam, model.sigma
    if isinstance(model, BrownianExponent):
        return model.m, model.sigma
    raise TypeError(f"not a Gaussian-exponent model: {type(model).__name__}")


def symmetric_driver(model: LevyModel) -> bool:
    """Whether (xi, eta, L) has the same law as (xi, eta, -L).

    Sufficient for the symmetric-increment conditions of the stable limit
    regimes.  Holds for the diffusion families (L an independent Brownian
    motion) and for CogarchCPP with a symmetric jump law, because xi depends
    on the jumps only through their squares.
    """
    if isinstance(model, CogarchCPP):
        return bool(model.jump_law.symmetric)
    return True


def model_id(model: LevyModel) -> str:
    """Stable human-readable provenance tag."""
    if isinstance(model, Nelson):
        return f"nelson(lambda={model.lam:g},a={model.a:g},sigma={model.sigma:.12g})"
    if isinstance(model, BrownianExponent):
        return f"brownian_exponent(m={model.m:.12g},sigma={model.sigma:.12g},eta_rate={model.eta_rate:g})"
    law = model.jump_law
    if isinstance(law, TwoPoint):
        jl = f"two_point(z={law.z:.12g})"
    elif isinstance(law, Gaussian):
        jl = f"gaussian(sd={law.sd:.12g})"
    else:
        jl = f"const_abs(z={law.z:.12g})"
    return (
        f"cogarch(beta={model.beta:g},c={model.c:g},"
        f"lambda_g={model.lambda_g:.12g},mu={model.mu:g},jumps={jl})"
    )


def model_hash(model: LevyModel) -> str:
    return hashlib.sha1(model_id(model).encode("utf-8")).hexdigest()[:12]


# ---------------------------------------------------------------------------
# Laplace exponent and its root
# ---------------------------------------------------------------------------


def laplace_exponent(model: LevyModel, v: float) -> float:
    """log E exp(-v * xi_1), in closed form per family.

    Vanishes at v = 0 for every model.  For CogarchCPP and v > 0 the value
    needs the jump moment E|Z|^(2v); a DomainError is raised when the jump
    law does not provide it.
    """
    v = float(v)
    if isinstance(model, (Nelson, BrownianExponent)):
        drift, sigma = _gauss_exponent_params(model)
        return -drift * v + 0.5 * sigma**2 * v**2
    if isinstance(model, CogarchCPP):
        if 2.0 * v > model.jump_law.max_moment_order:
            raise DomainError(
                f"laplace exponent at v={v:g} needs jump moment of order {2 * v:g}, "
                f"which the jump law does not declare finite"
            )
        if model.mu == 0.0 or model.lambda_g == 0.0:
            return -v * model.c
        try:
            with np.errstate(over="ignore"):
                growth = model.jump_law.squared_factor_moment(v, model.kappa)
        except OverflowError:
            return math.inf
        if not math.isfinite(growth):
            return math.inf
        return -v * model.c + model.mu * (growth - 1.0)
    raise TypeError(f"unknown model type: {type(model).__name__}")


def mean_exponent(model: LevyModel) -> float:
    """E(xi_1) = -psi'(0); positive mean is required for stationarity."""
    if isinstance(model, (Nelson, BrownianExponent)):
        return _gauss_exponent_params(model)[0]
    return model.c - model.mu * model.jump_law.log_factor_mean(model.kappa)


def find_alpha(
    model: LevyModel,
    bracket_hint: float | None = None,
    v_max: float = 1e6,
    tol: float = 1e-12,
) -> float:
    """Unique positive root of the Laplace exponent.

    Geometric expansion of the bracket from ``bracket_hint`` (default 1)
    followed by bisection; convexity of the exponent makes the root unique
    and the bisection unconditionally safe.

    Raises NotStationaryHeavyTail when E(xi_1) <= 0 (there is no decaying
    regime at all) and NoPositiveRoot when the exponent stays negative over
    the whole searchable domain (e.g. a pure-drift exponent).
    """
    if mean_exponent(model) <= 0:
        raise NotStationaryHeavyTail(
            f"E(xi_1) = {mean_exponent(model):g} <= 0 for {model_id(model)}"
        )
    hi = float(bracket_hint) if bracket_hint else 1.0
    if hi <= 0:
        raise InvalidConfig("bracket_hint must be > 0")
    lo = 0.0
    while True:
        try:
            val = laplace_exponent(model, hi)
        except DomainError as exc:
            raise NoPositiveRoot(
                f"exponent leaves its analytic domain before any sign change: {exc}"
            ) from exc
        if val >= 0.0:
            break
        lo, hi = hi, 2.0 * hi
        if hi > v_max:
            raise NoPositiveRoot(
                f"laplace exponent negative on (0, {v_max:g}] for {model_id(model)}"
            )
    if val == 0.0 and laplace_exponent(model, hi * (1 - 1e-12)) < 0.0:
        return hi
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if laplace_exponent(model, mid) < 0.0:
            lo = mid
        else:
            hi = mid
    root = 0.5 * (lo + hi)
    if abs(laplace_exponent(model, root)) > tol:
        raise NoPositiveRoot(
            f"bisection failed to polish the root below {tol:g} for {model_id(model)}"
        )
    return root


# ---------------------------------------------------------------------------
# analytic condition checks
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ConditionReport:
    """Analytic verdicts on the stationarity/moment conditions at order d.

    ``detail`` records each inequality separately: the root equation and
    exponent-moment bound ("root_moment"), the window-integral moment bound
    ("window_integral"), the diffusion-route bounds ("exp_eta_moments",
    "integrator_moment"), and the jump-route bounds ("jump_moment_2d",
    "jump_moment_4d").  holds_C implies holds_B implies alpha exists.
    """

    alpha: float | None
    d: float
    holds_A: bool
    holds_B: bool
    holds_C: bool
    detail: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.holds_C and not self.holds_B:
            raise InvalidConfig("inconsistent report: holds_C requires holds_B")
        if self.holds_B and self.alpha is None:
            raise InvalidConfig("inconsistent report: holds_B requires a tail-index root")


def check_conditions(model: LevyModel, d: float) -> ConditionReport:
    """Evaluate the moment conditions for a stationary Pareto-like volatility.

    All verdicts are analytic per family; nothing is sampled.  For the
    Gaussian-exponent families every exponential moment of xi and every
    moment of eta and L is finite, so the conditions reduce to the existence
    of the root alpha and d > alpha.  For CogarchCPP they reduce to the
    finiteness of the jump moments E|Z|^(2d) and E|Z|^max(4d, 1).
    """
    if d <= 0:
        raise InvalidConfig("moment order d must be > 0")
    try:
        alpha = find_alpha(model)
    except (NoPositiveRoot, NotStationaryHeavyTail):
        alpha = None

    detail: dict[str, bool] = {}
    # strict d > alpha, robust to the root's last-ulp error
    root_ok = alpha is not None and d - alpha > 1e-9 * max(1.0, alpha)
    detail["root_moment"] = root_ok  # psi(alpha) = 0 with d > alpha and psi(d) finite

    if isinstance(model, CogarchCPP):
        law = model.jump_law
        jump_2d = 2.0 * d <= law.max_moment_order
        jump_4d = max(4.0 * d, 1.0) <= law.max_moment_order
        detail["jump_moment_2d"] = jump_2d
        detail["jump_moment_4d"] = jump_4d
        detail["window_integral"] = root_ok and jump_2d
        holds_A = alpha is not None and jump_2d
        holds_B = root_ok and jump_2d
        holds_C = holds_B and jump_4d
    else:
        # Exponential moments of the Gaussian exponent, polynomial moments of
        # the deterministic subordinator and of the Brownian integrator are
        # all finite for every order.
        detail["exp_eta_moments"] = True
        detail["integrator_moment"] = True
        detail["window_integral"] = root_ok
        holds_A = alpha is not None
        holds_B = root_ok
        holds_C = holds_B

    return ConditionReport(
        alpha=alpha, d=d, holds_A=holds_A, holds_B=holds_B, holds_C=holds_C, detail=detail
    )


# ---------------------------------------------------------------------------
# exponent path simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EventPath:
    """Piecewise-linear-with-jumps exponent path of a CogarchCPP model.

    Between arrivals xi rises with slope c; at arrival time ``times[j]`` it
    drops by ``log_factors[j] = log(1 + kappa*sizes[j]^2)``.  The
    representation is exact: no discretisation anywhere.
    """

    times: np.ndarray
    sizes: np.ndarray
    log_factors: np.ndarray
    slope: float
    horizon: float

    def xi_at(self, t) -> np.ndarray:
        """Right-continuous xi at times t (vectorised)."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        idx = np.searchsorted(self.times, t, side="right")
        cum = np.concatenate(([0.0], np.cumsum(self.log_factors)))
        return self.slope * t - cum[idx]


@dataclass(frozen=True)
class GridPath:
    """Exponent values on a uniform grid, xi[0] = 0 at t = 0."""

    times: np.ndarray
    xi: np.ndarray


def simulate_xi_events(model: CogarchCPP, T: float, rng) -> EventPath:
    """Exact exponent path on [0, T]: Poisson(mu) arrivals, i.i.d. jump sizes."""
    if not isinstance(model, CogarchCPP):
        raise TypeError("event-driven exponent paths exist only for CogarchCPP")
    if T < 0:
        raise InvalidConfig("horizon T must be >= 0")
    rng = as_generator(rng)
    times = []
    if model.mu > 0 and T > 0:
        t = 0.0
        while True:
            t += rng.exponential(1.0 / model.mu)
            if t > T:
                break
            times.append(t)
    times = np.asarray(times, dtype=float)
    sizes = model.jump_law.sample(rng, times.size) if times.size else np.empty(0)
    return EventPath(
        times=times,
        sizes=sizes,
        log_factors=model.jump_log_factors(sizes),
        slope=model.c,
        horizon=float(T),
    )


def simulate_xi_grid(model: LevyModel, T: float, dt: float, rng) -> GridPath:
    """Exact Gaussian increments of xi on a uniform grid of step dt.

    Grid suprema of functionals of this path are biased low; consumers
    quantify the bias by step-halving extrapolation rather than bridge
    corrections.
    """
    if isinstance(model, CogarchCPP):
        raise TypeError("use simulate_xi_events for compound-Poisson exponents")
    if T <= 0 or dt <= 0 or dt > T:
        raise InvalidConfig("need 0 < dt <= T")
    rng = as_generator(rng)
    drift, sigma = _gauss_exponent_params(model)
    n = int(round(T / dt))
    incr = drift * dt + sigma * math.sqrt(dt) * rng.standard_normal(n)
    xi = np.concatenate(([0.0], np.cumsum(incr)))
    times = dt * np.arange(n + 1)
    return GridPath(times=times, xi=xi)


# ---------------------------------------------------------------------------
# batched event generation (shared by the simulation and constants engines)
# ---------------------------------------------------------------------------


def padded_event_batch(model: CogarchCPP, T: float, n_paths: int, rng: np.random.Generator):
    """Arrival times and jumps for n_paths independent paths on (0, T].

    Returns ``(times, z, zt, mask)`` as (n_paths, m) arrays where m is the
    largest arrival count in the batch.  Padding entries carry time T and
    zero jump, which is neutral in every downstream formula (zero gap
    contribution, unit volatility factor, zero integrator increment).
    """
    counts = rng.poisson(model.mu * T, n_paths) if model.mu > 0 else np.zeros(n_paths, dtype=int)
    m = int(counts.max()) if n_paths else 0
    if m == 0:
        shape = (n_paths, 0)
        empty = np.empty(shape)
        return empty, empty.copy(), empty.copy(), np.empty(shape, dtype=bool)
    # Valid entries occupy the first `count` slots both before and after the
    # sort, because padding is pinned at time T.
    mask = np.arange(m)[None, :] < counts[:, None]
    u = rng.random((n_paths, m)) * T
    u[~mask] = T
    times = np.sort(u, axis=1)
    z = model.jump_law.sample(rng, (n_paths, m))
    z = np.where(mask, z, 0.0)
    zt = model.jump_log_factors(z)
    return times, z, zt, mask
