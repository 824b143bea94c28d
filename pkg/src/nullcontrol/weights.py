"""Carleman weight functions mu_{p,q,r}(t) and their calculus.

Every weight used by the solver is of the form

    mu_{p,q,r}(t) = exp(p*s*alpha1 / l(t)^4) * exp(q*s*alpha2 / l(t)^4) * l(t)^r,

a function of time alone.  The spatial structure of the classical weight
construction enters only through the extrema (alpha1, alpha2) of the bump
profile, which are computed once at setup.  All evaluation is done in log
space so that products, derivatives and dominance comparisons stay exact
far beyond the range of double-precision exponentials.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import UnknownWeightName, ValidationError
from .geometry import BoxDomain, Rect

#: hard ceiling on any clamped exponent produced by the auto-selected s
EXPONENT_CAP = 250.0

#: default target for the largest clamped exponent (see build_setup)
DEFAULT_S_EXPONENT = 120.0

#: mu() raises OverflowError beyond this log value
_MU_LOG_MAX = 700.0


@dataclass(frozen=True)
class WeightExponents:
    """Exponent triple (p, q, r) of a weight mu_{p,q,r}."""

    p: float
    q: float
    r: float

    def __add__(self, other):
        return WeightExponents(self.p + other.p, self.q + other.q, self.r + other.r)

    def __neg__(self):
        return WeightExponents(-self.p, -self.q, -self.r)

    def scaled(self, k):
        return WeightExponents(k * self.p, k * self.q, k * self.r)


_NAMED = {
    "rho0": WeightExponents(0.0, 1.0, 6.0),
    "rho1": WeightExponents(0.0, 1.0, 2.0),
    "rho2": WeightExponents(0.0, 1.0, -2.0),
    "rho3": WeightExponents(2.0, -1.0, 15.0),
    "rho4": WeightExponents(4.0, -3.0, 32.0),
    "rho6": WeightExponents(1.0, -0.5, 17.5),
    "rho7": WeightExponents(1.0, -0.5, 20.0),
    "rho8": WeightExponents(-1.0, 1.0, 0.0),
    "rho9": WeightExponents(-1.0, 1.0, 2.5),
    "rho10": WeightExponents(-1.0, 1.0, 5.0),
    "rho11": WeightExponents(-1.0, 1.0, 7.5),
    "zeta": WeightExponents(-1.0, 1.0, 0.0),
    "zeta_hat": WeightExponents(-1.0, 1.0, 5.0),
}

_UNICODE_ALIASES = {
    "ρ₀": "rho0", "ρ₁": "rho1", "ρ₂": "rho2",
    "ρ₃": "rho3", "ρ₄": "rho4", "ρ₆": "rho6",
    "ρ₇": "rho7", "ρ₈": "rho8", "ρ₉": "rho9",
    "ρ₁₀": "rho10", "ρ₁₁": "rho11",
    "ζ": "zeta", "ζ̂": "zeta_hat", "ζ̂ ": "zeta_hat",
}


def named_weight(name):
    """Return the exponent triple of a named weight (rho0..rho11, zeta, zeta_hat)."""
    key = _UNICODE_ALIASES.get(name, name)
    try:
        return _NAMED[key]
    except KeyError:
        raise UnknownWeightName(name) from None


def named_weight_table():
    """All distinct named weights as an ordered (name, exponents) list."""
    return [(k, v) for k, v in _NAMED.items() if not k.startswith("zeta")]


def eta0(x1, x2, domain: BoxDomain):
    """Normalized bump profile on Omega: positive inside, zero on the boundary.

    eta0(x) = x1 (a - x1) x2 (b - x2) / (a^2 b^2 / 16), so the maximum value 1
    is attained at the center of the rectangle.
    """
    a, b = domain.a, domain.b
    return x1 * (a - x1) * x2 * (b - x2) / (a * a * b * b / 16.0)


def eta0_grad(x1, x2, domain: BoxDomain):
    """Analytic gradient of eta0 (components along x1, x2)."""
    a, b = domain.a, domain.b
    norm = a * a * b * b / 16.0
    g1 = (a - 2.0 * x1) * x2 * (b - x2) / norm
    g2 = x1 * (a - x1) * (b - 2.0 * x2) / norm
    return g1, g2


@dataclass(frozen=True)
class CarlemanSetup:
    """Global data defining every weight mu_{p,q,r} on [0, T]."""

    T: float
    s_param: float
    lambda_param: float
    m_exp: float
    eta0_norm_inf: float
    alpha1: float
    alpha2: float
    gamma1: float
    gamma2: float
    ell_clamp: float
    omega1: Rect

    def exponent_coeff(self, e: WeightExponents):
        """The signed combination (p*alpha1 + q*alpha2) * s for a weight."""
        return (e.p * self.alpha1 + e.q * self.alpha2) * self.s_param


def alpha_extrema(domain: BoxDomain, lambda_param, m_exp, grid_n=1024):
    """Extrema of the profile functions over a (grid_n+1)^2 sample of the closure.

    Returns (eta0_norm_inf, alpha1, alpha2, gamma1, gamma2).  Separated from
    build_setup so the extrema can be inspected for parameter combinations
    that fail the setup ratio validation.
    """
    if grid_n < 64:
        raise ValidationError("grid_n must be at least 64")
    x1 = np.linspace(0.0, domain.a, grid_n + 1)
    x2 = np.linspace(0.0, domain.b, grid_n + 1)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    eta = eta0(X1, X2, domain)
    eta_inf = float(eta.max())
    lam, m = lambda_param, m_exp
    top = math.exp(1.25 * lam * m * eta_inf)
    gamma_bar = np.exp(lam * (eta + m * eta_inf))
    alpha_bar = top - gamma_bar
    return (
        eta_inf,
        float(alpha_bar.min()), float(alpha_bar.max()),
        float(gamma_bar.min()), float(gamma_bar.max()),
    )


def auto_ell_clamp(T, nt):
    """Clamp floor placing the clamp onset one time slab past t = T/2."""
    if nt < 3:
        return T * T / 8.0
    return T * T / 4.0 - (T / nt) ** 2


def build_setup(domain: BoxDomain, omega1=None, lambda_param=12.0, m_exp=5.0,
                ell_clamp=None, grid_n=256, s_exponent=DEFAULT_S_EXPONENT):
    """Compute the Carleman data and auto-select the parameter s.

    s is chosen so that the largest clamped exponent
    max(|p| alpha1 + |q| alpha2) * s / ell_clamp^4 over the named weights
    equals min(s_exponent, 250); the overflow guard keeps every clamped
    mu_log within double range while dominance relations, which are
    invariant under rescaling s > 0, are unaffected.
    """
    if m_exp <= 4.0:
        raise ValidationError("m_exp must exceed 4 (positivity of the profile gap)")
    if lambda_param <= 0.0:
        raise ValidationError("lambda_param must be positive")
    if 1.25 * lambda_param * m_exp > 650.0:
        raise ValidationError("lambda_param * m_exp too large for double precision")
    if omega1 is None:
        omega1 = domain.omega1
    cx, cy = domain.rect.center
    if not omega1.contains(cx, cy):
        raise ValidationError(
            "the domain center (unique critical point of eta0) must lie in omega1")
    if ell_clamp is None:
        ell_clamp = auto_ell_clamp(domain.T, 12)
    if not 0.0 < ell_clamp <= domain.T ** 2 / 4.0:
        raise ValidationError("ell_clamp must lie in ]0, T^2/4]")

    eta_inf, a1, a2, g1, g2 = alpha_extrema(domain, lambda_param, m_exp, grid_n)
    if a1 <= 0.0:
        raise ValidationError("alpha1 must be positive (m_exp > 4 guarantees it)")
    if a2 / a1 >= 4.0 / 3.0:
        raise ValidationError(
            f"alpha2/alpha1 = {a2 / a1:.4f} >= 4/3; raise lambda_param so the "
            "profile flattens (the blow-up of rho3 and rho4 needs this ratio)")

    budget = min(float(s_exponent), EXPONENT_CAP)
    max_abs = max(abs(e.p) * a1 + abs(e.q) * a2 for _, e in named_weight_table())
    s = budget * ell_clamp ** 4 / max_abs

    return CarlemanSetup(
        T=domain.T, s_param=s, lambda_param=lambda_param, m_exp=m_exp,
        eta0_norm_inf=eta_inf, alpha1=a1, alpha2=a2, gamma1=g1, gamma2=g2,
        ell_clamp=ell_clamp, omega1=omega1,
    )


def _ell_unclamped(t, T):
    t = np.asarray(t, dtype=float)
    plateau = T * T / 4.0
    decay = t * (T - t)
    return np.where(t <= 0.5 * T, plateau, decay)


def ell(t, setup: CarlemanSetup):
    """Clamped length function l(t): T^2/4 up to T/2, then t(T-t), floored."""
    raw = _ell_unclamped(t, setup.T)
    out = np.maximum(raw, setup.ell_clamp)
    return float(out) if out.ndim == 0 else out


def ell_prime(t, setup: CarlemanSetup):
    """Derivative of the clamped l: zero on the plateau and the clamped tail."""
    t = np.asarray(t, dtype=float)
    T = setup.T
    raw = _ell_unclamped(t, setup.T)
    slope = np.where(t <= 0.5 * T, 0.0, T - 2.0 * t)
    out = np.where(raw > setup.ell_clamp, slope, 0.0)
    return float(out) if out.ndim == 0 else out


def mu_log(e: WeightExponents, t, setup: CarlemanSetup, clamped=True):
    """log mu_{p,q,r}(t) = (p s alpha1 + q s alpha2)/l^4 + r log l, exactly."""
    if clamped:
        length = ell(t, setup)
    else:
        length = _ell_unclamped(t, setup.T)
        length = float(length) if np.ndim(length) == 0 else length
    coeff = setup.exponent_coeff(e)
    out = coeff / np.asarray(length) ** 4 + e.r * np.log(length)
    return float(out) if np.ndim(out) == 0 else out


def mu(e: WeightExponents, t, setup: CarlemanSetup):
    """mu_{p,q,r}(t) with the clamped l; raises OverflowError past exp range."""
    lg = np.asarray(mu_log(e, t, setup))
    if np.any(lg > _MU_LOG_MAX):
        raise OverflowError(
            f"mu_log = {float(np.max(lg)):.1f} exceeds {_MU_LOG_MAX}; "
            "the setup's s auto-scaling should prevent this")
    out = np.exp(lg)
    return float(out) if out.ndim == 0 else out


def mu_dt(e: WeightExponents, t, setup: CarlemanSetup):
    """Analytic d/dt of mu_{p,q,r}; zero wherever l is flat (plateau or clamp)."""
    length = np.asarray(ell(t, setup))
    lp = np.asarray(ell_prime(t, setup))
    coeff = setup.exponent_coeff(e)
    factor = -4.0 * lp * coeff / length ** 5 + e.r * lp / length
    out = np.asarray(mu(e, t, setup)) * factor
    return float(out) if out.ndim == 0 else out


def dominates(e1: WeightExponents, e2: WeightExponents, setup: CarlemanSetup):
    """True iff mu_{e1} <= C mu_{e2} on ]0,T[ for some constant C (unclamped l).

    Equivalent to: the signed exponent combinations satisfy A1 < A2, or
    A1 == A2 with r1 >= r2, where Ai = pi*alpha1 + qi*alpha2.  The truth
    value does not depend on s.
    """
    a1_ = e1.p * setup.alpha1 + e1.q * setup.alpha2
    a2_ = e2.p * setup.alpha1 + e2.q * setup.alpha2
    scale = max(abs(a1_), abs(a2_), 1.0)
    if abs(a1_ - a2_) <= 1e-12 * scale:
        return e1.r >= e2.r
    return a1_ < a2_
