import math

import numpy as np
import pytest

from nullcontrol.errors import UnknownWeightName, ValidationError
from nullcontrol.geometry import BoxDomain, Rect
from nullcontrol.weights import (
    CarlemanSetup, WeightExponents, alpha_extrema, auto_ell_clamp, build_setup,
    dominates, ell, eta0, eta0_grad, mu, mu_dt, mu_log, named_weight,
    named_weight_table,
)

# Extrema of the profile functions for lambda=1, m=5 on ]0,3[^2, frozen from
# the 1024-grid oracle (they coincide with the closed forms
# alpha = e^{6.25} - e^{lambda(eta0 + 5)} evaluated at eta0 in {1, 0}).
ALPHA1_LAM1 = 114.58403117560687
ALPHA2_LAM1 = 369.59966556576535
GAMMA1_LAM1 = 148.4131591025766
GAMMA2_LAM1 = 403.4287934927351


def test_eta0_boundary_and_center(square_domain):
    for x1, x2 in [(0.0, 1.0), (3.0, 2.0), (1.7, 0.0), (0.4, 3.0)]:
        assert eta0(x1, x2, square_domain) == 0.0
    assert eta0(1.5, 1.5, square_domain) == pytest.approx(1.0, abs=0.0)


def test_eta0_gradient_nonzero_off_omega1(square_domain):
    # cell-centered 200x200 sample of the closure; a vertex-aligned grid would
    # hit the four corners, where any C^1 function vanishing on the boundary
    # of a rectangle has zero gradient
    n = 200
    h1, h2 = square_domain.a / n, square_domain.b / n
    x1 = np.linspace(0.5 * h1, square_domain.a - 0.5 * h1, n)
    x2 = np.linspace(0.5 * h2, square_domain.b - 0.5 * h2, n)
    X1, X2 = np.meshgrid(x1, x2, indexing="ij")
    outside = ~square_domain.omega1.contains(X1, X2)
    g1, g2 = eta0_grad(X1, X2, square_domain)
    norms = np.hypot(g1, g2)[outside]
    assert norms.min() > 0.0


def test_alpha_extrema_frozen_regression(square_domain):
    eta_inf, a1, a2, g1, g2 = alpha_extrema(square_domain, 1.0, 5.0, grid_n=1024)
    assert eta_inf == pytest.approx(1.0, rel=1e-14)
    assert a1 == pytest.approx(ALPHA1_LAM1, rel=1e-12)
    assert a2 == pytest.approx(ALPHA2_LAM1, rel=1e-12)
    assert g1 == pytest.approx(GAMMA1_LAM1, rel=1e-12)
    assert g2 == pytest.approx(GAMMA2_LAM1, rel=1e-12)


def test_alpha_ratio_decreases_with_lambda(square_domain):
    _, a1_lo, a2_lo, _, _ = alpha_extrema(square_domain, 1.0, 5.0, grid_n=256)
    _, a1_hi, a2_hi, _, _ = alpha_extrema(square_domain, 3.0, 5.0, grid_n=256)
    assert a2_hi / a1_hi < a2_lo / a1_lo
    assert a1_lo <= a2_lo and a1_hi <= a2_hi


def test_build_setup_rejects_wide_ratio(square_domain):
    with pytest.raises(ValidationError, match="4/3"):
        build_setup(square_domain, lambda_param=1.0, m_exp=5.0, ell_clamp=0.2)


def test_build_setup_validations(square_domain):
    with pytest.raises(ValidationError):
        build_setup(square_domain, m_exp=4.0, ell_clamp=0.2)
    with pytest.raises(ValidationError):
        build_setup(square_domain, lambda_param=-1.0, ell_clamp=0.2)
    with pytest.raises(ValidationError):
        build_setup(square_domain, ell_clamp=0.3)  # > T^2/4
    # center of the domain must lie inside omega1
    with pytest.raises(ValidationError, match="center"):
        build_setup(square_domain, omega1=Rect(0.6, 1.2, 0.6, 1.2), ell_clamp=0.2)


def test_auto_ell_clamp():
    assert auto_ell_clamp(1.0, 12) == pytest.approx(0.25 - (1.0 / 12.0) ** 2)
    assert auto_ell_clamp(1.0, 12) < 0.25
    assert auto_ell_clamp(2.0, 3) <= 1.0


def test_ell_piecewise(setup12):
    assert ell(0.5, setup12) == pytest.approx(0.25)
    assert ell(0.2, setup12) == pytest.approx(0.25)
    # t = 3T/4 lies past the clamp onset of the 12-slab default, so check the
    # unclamped branch with a smaller clamp
    deep = CarlemanSetup(**{**setup12.__dict__, "ell_clamp": 0.05})
    assert ell(0.75, deep) == pytest.approx(0.1875)
    assert ell(1.0, deep) == pytest.approx(0.05)
    assert ell(1.0, setup12) == pytest.approx(setup12.ell_clamp)


def test_mu_pure_power_of_ell(setup12):
    e = WeightExponents(0.0, 0.0, 2.0)
    assert mu(e, 0.5, setup12) == pytest.approx(0.0625, rel=1e-14)


def test_mu_product_law(setup12, rng):
    ts = rng.uniform(0.01, 0.99, size=20)
    for _ in range(50):
        e1 = WeightExponents(*rng.uniform(-4, 4, size=3))
        e2 = WeightExponents(*rng.uniform(-4, 4, size=3))
        lhs = mu_log(e1, ts, setup12) + mu_log(e2, ts, setup12)
        rhs = mu_log(e1 + e2, ts, setup12)
        scale = np.maximum(np.abs(rhs), 1.0)
        assert np.max(np.abs(lhs - rhs) / scale) < 1e-12


def test_rho3_grows_toward_terminal_time(setup12):
    e = named_weight("rho3")
    assert mu(e, 0.9, setup12) > mu(e, 0.5, setup12)


def test_mu_dt_zero_on_plateau_and_clamp(setup12, rng):
    for _ in range(10):
        e = WeightExponents(*rng.uniform(-4, 4, size=3))
        assert mu_dt(e, 0.3, setup12) == 0.0
        assert mu_dt(e, 0.99, setup12) == 0.0  # clamped tail


def test_mu_dt_matches_finite_differences(square_domain, rng):
    setup = build_setup(square_domain, ell_clamp=0.09)  # clamp onset at t = 0.9
    ts = rng.uniform(0.55, 0.88, size=12)
    for _ in range(8):
        e = WeightExponents(*rng.uniform(-3, 3, size=3))
        for t in ts:
            exact = mu_dt(e, t, setup)
            best = math.inf
            for h in (1e-4, 1e-5, 1e-6):
                fd = (mu(e, t + h, setup) - mu(e, t - h, setup)) / (2 * h)
                best = min(best, abs(fd - exact) / max(abs(exact), 1e-300))
            assert best < 1e-6


def test_mu_dt_bound_by_shifted_weight(setup12):
    # |d/dt mu_{p,q,r}| <= C mu_{p,q,r-5} with C fitted over a time sample
    ts = np.linspace(0.01, 0.99, 199)
    for name, e in named_weight_table():
        shifted = WeightExponents(e.p, e.q, e.r - 5.0)
        ratios = []
        for t in ts:
            d = mu_dt(e, t, setup12)
            if d == 0.0:
                continue
            ratios.append(abs(d) * math.exp(-mu_log(shifted, t, setup12)))
        c_fit = max(ratios)
        assert np.isfinite(c_fit), name


def test_named_weight_table():
    assert named_weight("rho4") == WeightExponents(4.0, -3.0, 32.0)
    assert named_weight("ρ₄") == WeightExponents(4.0, -3.0, 32.0)
    assert named_weight("rho8") == named_weight("zeta") == WeightExponents(-1.0, 1.0, 0.0)
    assert named_weight("rho10") == named_weight("zeta_hat") == WeightExponents(-1.0, 1.0, 5.0)
    assert named_weight("rho6") == WeightExponents(1.0, -0.5, 17.5)
    assert named_weight("rho9") == WeightExponents(-1.0, 1.0, 2.5)
    with pytest.raises(UnknownWeightName):
        named_weight("rho5")


def test_dominates_reflexive_and_chain(setup12):
    rho0, rho3 = named_weight("rho0"), named_weight("rho3")
    e = WeightExponents(1.0, 2.0, 3.0)
    assert dominates(e, e, setup12)
    # the classical chain orders rho3 below rho0
    assert dominates(rho3, rho0, setup12)
    assert not dominates(rho0, rho3, setup12)


def _dominance_oracle(e1, e2, setup):
    """Sampling oracle: evaluate log(mu_e1 / mu_e2) with the unclamped l at
    50-digit precision near t = T; the ratio is bounded iff the log difference
    stops growing."""
    from mpmath import mp

    with mp.workdps(50):
        def logdiff(t):
            length = mp.mpf(t) * (mp.mpf(setup.T) - mp.mpf(t))
            c1 = (mp.mpf(e1.p) * mp.mpf(setup.alpha1)
                  + mp.mpf(e1.q) * mp.mpf(setup.alpha2)) * mp.mpf(setup.s_param)
            c2 = (mp.mpf(e2.p) * mp.mpf(setup.alpha1)
                  + mp.mpf(e2.q) * mp.mpf(setup.alpha2)) * mp.mpf(setup.s_param)
            return (c1 - c2) / length ** 4 + (mp.mpf(e1.r) - mp.mpf(e2.r)) * mp.log(length)

        d0 = logdiff(setup.T * (1.0 - 1e-4))
        d1 = logdiff(setup.T * (1.0 - 1e-8))
        return bool(d1 - d0 <= mp.mpf("1e-9"))


def test_dominates_matches_sampling_oracle(setup12, rng):
    for _ in range(50):
        e1 = WeightExponents(*rng.uniform(-4, 4, size=3))
        e2 = WeightExponents(*rng.uniform(-4, 4, size=3))
        assert dominates(e1, e2, setup12) == _dominance_oracle(e1, e2, setup12)
    # equal exponential part: decided by the polynomial order
    base = WeightExponents(1.5, -0.5, 4.0)
    higher = WeightExponents(1.5, -0.5, 7.0)
    assert dominates(higher, base, setup12)
    assert not dominates(base, higher, setup12)
    assert _dominance_oracle(higher, base, setup12)
    assert not _dominance_oracle(base, higher, setup12)


def test_dominates_invariant_under_s_rescaling(setup12, rng):
    scaled = CarlemanSetup(**{**setup12.__dict__, "s_param": setup12.s_param * 1e6})
    for _ in range(30):
        e1 = WeightExponents(*rng.uniform(-4, 4, size=3))
        e2 = WeightExponents(*rng.uniform(-4, 4, size=3))
        assert dominates(e1, e2, setup12) == dominates(e1, e2, scaled)


def test_blowup_of_rho3_rho4_at_terminal_time(setup12):
    # alpha2 < (4/3) alpha1 makes the exponential coefficients of rho3, rho4
    # positive, so the unclamped logs diverge to +inf (and their inverses to
    # -inf) as t -> T
    for name in ("rho3", "rho4"):
        e = named_weight(name)
        near = mu_log(e, setup12.T * (1 - 1e-7), setup12, clamped=False)
        mid = mu_log(e, 0.5 * setup12.T, setup12, clamped=False)
        assert near > mid + 1e4
        assert mu_log(-e, setup12.T * (1 - 1e-7), setup12, clamped=False) < -1e4


def test_mu_overflow_guard(setup12):
    hot = CarlemanSetup(**{**setup12.__dict__, "s_param": setup12.s_param * 1e3})
    with pytest.raises(OverflowError):
        mu(named_weight("rho0"), hot.T, hot)


def test_setup_exponent_budget(setup12):
    # the largest |p| alpha1 + |q| alpha2 over named weights, scaled by
    # s / ell_clamp^4, must meet the configured budget (120 by default)
    worst = max(
        (abs(e.p) * setup12.alpha1 + abs(e.q) * setup12.alpha2) * setup12.s_param
        / setup12.ell_clamp ** 4
        for _, e in named_weight_table()
    )
    assert worst == pytest.approx(120.0, rel=1e-9)
    assert worst <= 250.0
