import math

import numpy as np
import pytest

from genou import BrownianExponent, CogarchCPP, DeterministicAbs, Nelson, TwoPoint


@pytest.fixture
def nelson2():
    """Mean-reverting diffusion with tail index 2 (lam=1, a=1, sigma^2=2)."""
    return Nelson(lam=1.0, a=1.0, sigma=math.sqrt(2.0))


@pytest.fixture
def cogarch1():
    """Compound-Poisson model with tail index exactly 1.

    c=1, mu=1 and a symmetric two-point jump with lambda_g*e*z^2 = 1, so the
    exponent jump is log 2 and the root solves 2^s - s - 1 = 0 at s = 1.
    """
    return CogarchCPP(beta=1.0, c=1.0, lambda_g=1.0 / math.e, mu=1.0, jump_law=TwoPoint(1.0))


@pytest.fixture
def cogarch1_det():
    """Same exponent as cogarch1 but with one-sided (always +z) jumps."""
    return CogarchCPP(
        beta=1.0, c=1.0, lambda_g=1.0 / math.e, mu=1.0, jump_law=DeterministicAbs(1.0)
    )


@pytest.fixture
def brownian2():
    """Brownian exponent with m = sigma^2 * alpha / 2 at alpha = 2."""
    return BrownianExponent(m=1.0, sigma=1.0, eta_rate=0.5)


@pytest.fixture
def drift_only():
    """Degenerate control: no jumps, exponent is the pure drift c*t."""
    return CogarchCPP(beta=1.0, c=1.0, lambda_g=0.3, mu=0.0, jump_law=TwoPoint(1.0))


def cogarch_alpha(target: float, c: float = 1.0, mu: float = 1.0) -> CogarchCPP:
    """Two-point model solved so that the exponent root is exactly `target`.

    psi(s) = -(mu + s c) + mu * (1 + kappa z^2)^s vanishes at s = target when
    1 + kappa z^2 = ((mu + target*c)/mu)^(1/target).
    """
    factor = ((mu + target * c) / mu) ** (1.0 / target)
    lambda_g = (factor - 1.0) / math.exp(c)
    return CogarchCPP(beta=1.0, c=c, lambda_g=lambda_g, mu=mu, jump_law=TwoPoint(1.0))


def assert_close(actual, expected, rel=None, abs_tol=None, msg=""):
    ok = True
    if rel is not None:
        ok = ok and abs(actual - expected) <= rel * abs(expected)
    if abs_tol is not None:
        ok = ok and abs(actual - expected) <= abs_tol
    assert ok, f"{msg}: actual={actual!r}, expected={expected!r} (rel={rel}, abs={abs_tol})"
