"""Distribution layer: closed forms, inversion identities, sampling moments."""

import math

import numpy as np
import pytest
import scipy.stats
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.integrate import quad

from pbslab import (Beta, EmpiricalGrid, Lognormal, NegligibleMassError,
                    Uniform, lognormal_put_value, lognormal_truncated_mean,
                    parse_distribution)
from pbslab.distributions import lower_tail_exponent


def _empirical_example() -> EmpiricalGrid:
    x = np.array([0.0, 0.2, 0.5, 0.8, 1.1, 1.6])
    c = np.array([0.0, 0.15, 0.35, 0.65, 0.9, 1.0])
    return EmpiricalGrid(x, c)


ALL_KINDS = [
    Uniform(0.0, 1.0),
    Uniform(0.5, 2.5),
    Beta(2.0, 2.0),
    Beta(0.7, 3.0),
    Lognormal(0.0, 1.0),
    Lognormal(-0.02, 0.2),
    _empirical_example(),
]


# ---------------------------------- CDF/PDF -----------------------------------


def test_cdf_closed_forms():
    assert Uniform(0, 1).cdf(0.3) == pytest.approx(0.3, abs=1e-15)
    assert Beta(1, 1).cdf(0.42) == pytest.approx(0.42, abs=1e-12)
    assert Beta(2, 2).cdf(0.5) == pytest.approx(0.5, abs=1e-12)


def test_pdf_closed_forms():
    assert Uniform(0, 1).pdf(0.7) == pytest.approx(1.0, abs=1e-15)
    assert Beta(2, 2).pdf(0.5) == pytest.approx(1.5, abs=1e-12)
    assert Lognormal(0.0, 1.0).pdf(1e-12) == pytest.approx(0.0, abs=1e-30)
    assert Lognormal(0.0, 1.0).pdf(0.0) == 0.0


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: repr(d))
def test_pdf_is_cdf_derivative(dist):
    """Central finite difference of the CDF matches the density to 1e-6."""
    lo, hi = dist.support
    hi = min(hi, float(dist.quantile(0.999)))
    if isinstance(dist, EmpiricalGrid):
        x = 0.5 * (dist.points[:-1] + dist.points[1:])  # segment midpoints
    else:
        x = np.linspace(lo + 0.02 * (hi - lo), hi - 0.02 * (hi - lo), 200)
    h = 1e-6 * max(1.0, hi - lo)
    fd = (dist.cdf(x + h) - dist.cdf(x - h)) / (2.0 * h)
    assert np.max(np.abs(fd - dist.pdf(x))) < 1e-6


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: repr(d))
def test_cdf_bounds_and_monotonicity(dist):
    lo, hi = dist.support
    hi = min(hi, float(dist.quantile(1 - 1e-12)))
    x = np.linspace(lo - 0.5, hi + 0.5, 500)
    c = dist.cdf(x)
    assert np.all(np.diff(c) >= -1e-15)
    assert np.all((c >= 0.0) & (c <= 1.0))
    assert dist.cdf(lo) == pytest.approx(0.0, abs=1e-12)


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: repr(d))
def test_pdf_integrates_to_one(dist):
    lo = dist.support[0]
    hi = float(dist.quantile(1 - 1e-13)) if not math.isfinite(dist.support[1]) \
        else dist.support[1]
    total = quad(lambda t: float(dist.pdf(t)), lo, hi, limit=400)[0]
    assert total == pytest.approx(1.0, abs=1e-6)


# --------------------------------- quantiles ----------------------------------


def test_quantile_closed_forms():
    assert Uniform(0, 1).quantile(0.25) == pytest.approx(0.25, abs=1e-15)
    assert Beta(2, 2).quantile(0.5) == pytest.approx(0.5, abs=1e-12)
    assert Lognormal(0.0, 1.0).quantile(0.5) == pytest.approx(1.0, rel=1e-12)


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: repr(d))
def test_quantile_cdf_roundtrip(dist):
    """quantile(cdf(x)) recovers x to 1e-8 on 1000 interior points."""
    q = np.linspace(1e-4, 1.0 - 1e-4, 1000)
    x = np.asarray(dist.quantile(q), dtype=float)
    back = np.asarray(dist.quantile(np.asarray(dist.cdf(x))), dtype=float)
    scale = np.maximum(1.0, np.abs(x))
    assert np.max(np.abs(back - x) / scale) < 1e-8
    # and the inner identity: cdf(quantile(q)) = q to 1e-10
    assert np.max(np.abs(np.asarray(dist.cdf(x)) - q)) < 1e-10


@pytest.mark.parametrize("bad_q", [-0.1, 1.5, math.nan])
def test_quantile_rejects_bad_probability(bad_q):
    with pytest.raises(ValueError):
        Uniform(0, 1).quantile(bad_q)


# --------------------------------- sampling -----------------------------------


def _fourth_central_moment(dist) -> float:
    if isinstance(dist, Uniform):
        frozen = scipy.stats.uniform(dist.lo, dist.hi - dist.lo)
    elif isinstance(dist, Beta):
        frozen = scipy.stats.beta(dist.alpha, dist.beta)
    elif isinstance(dist, Lognormal):
        frozen = scipy.stats.lognorm(dist.log_sd, scale=math.exp(dist.log_mean))
    else:  # piecewise-uniform mixture: integrate segment raw moments
        w = np.diff(dist.cdf_values)
        x0, x1 = dist.points[:-1], dist.points[1:]
        raw = [float(np.sum(w * (x1 ** (k + 1) - x0 ** (k + 1)) / ((k + 1) * (x1 - x0))))
               for k in range(1, 5)]
        m = raw[0]
        return raw[3] - 4 * m * raw[2] + 6 * m * m * raw[1] - 3 * m ** 4
    kurt = float(frozen.stats(moments="k"))
    return (kurt + 3.0) * frozen.var() ** 2


@pytest.mark.parametrize("dist", ALL_KINDS, ids=lambda d: repr(d))
def test_sample_moments(dist):
    """Mean and variance of 1e6 inverse-transform draws sit within 4 SEs."""
    n = 1_000_000
    rng = np.random.default_rng(1234)
    draws = dist.sample(rng, size=n)
    mu, var = dist.mean(), dist.variance()
    assert abs(float(np.mean(draws)) - mu) < 4.0 * math.sqrt(var / n)
    mu4 = _fourth_central_moment(dist)
    se_var = math.sqrt(max(mu4 - var ** 2, 0.0) / n)
    assert abs(float(np.var(draws, ddof=1)) - var) < 4.0 * se_var


def test_sample_unit_mean_martingale_parameterization():
    # log-mean pinned to -s^2/2 forces a unit mean
    dist = Lognormal(-0.02, 0.2)
    rng = np.random.default_rng(99)
    draws = dist.sample(rng, size=1_000_000)
    se = math.sqrt(dist.variance() / draws.size)
    assert abs(float(np.mean(draws)) - 1.0) < 3.0 * se


def test_sampling_is_reproducible():
    dist = Beta(2, 2)
    a = dist.sample(np.random.default_rng(5), size=100)
    b = dist.sample(np.random.default_rng(5), size=100)
    assert np.array_equal(a, b)


# ----------------------------- lognormal calculus -----------------------------


def test_truncated_mean_no_truncation_limit():
    law = Lognormal(0.3, 0.5)
    b = float(law.quantile(1 - 1e-15))
    assert lognormal_truncated_mean(law, b) == pytest.approx(law.mean(), abs=1e-9)
    unit = Lognormal(math.log(1.0) - 0.5 * 0.2 ** 2, 0.2)
    assert lognormal_truncated_mean(unit, float(unit.quantile(1 - 1e-15))) == \
        pytest.approx(1.0, abs=1e-9)


def test_truncated_mean_against_quadrature():
    law = Lognormal(-0.02, 0.2)
    num = quad(lambda x: x * float(law.pdf(x)), 0.0, 1.0, limit=400)[0]
    expected = num / float(law.cdf(1.0))
    assert lognormal_truncated_mean(law, 1.0) == pytest.approx(expected, abs=1e-8)


def test_truncated_mean_strict_bounds():
    law = Lognormal(-0.02, 0.2)
    for q in (1e-6, 0.1, 0.5, 0.9, 1 - 1e-10):
        b = float(law.quantile(q))
        t = lognormal_truncated_mean(law, b)
        assert t < b and t < law.mean()


def test_truncated_mean_errors():
    law = Lognormal(0.0, 1.0)
    with pytest.raises(ValueError):
        lognormal_truncated_mean(law, 0.0)
    with pytest.raises(ValueError):
        lognormal_truncated_mean(law, -1.0)
    with pytest.raises(NegligibleMassError):
        lognormal_truncated_mean(law, 1e-200)


def test_put_value_basics():
    assert lognormal_put_value(1.0, 0.0, 0.2) == 0.0
    # deterministic limit: price surely above the strike
    assert lognormal_put_value(1.0, 0.9, 1e-6) == pytest.approx(0.0, abs=1e-9)
    with pytest.raises(ValueError):
        lognormal_put_value(-1.0, 0.5, 0.2)
    with pytest.raises(ValueError):
        lognormal_put_value(1.0, 0.5, 0.0)


def test_put_value_range():
    for b in (0.2, 0.8, 1.0, 1.7):
        p = lognormal_put_value(1.0, b, 0.3)
        assert max(b - 1.0, 0.0) - 1e-12 <= p < b


def test_put_truncated_mean_cross_identity():
    """P(V<b)*(E[V|V<b] - b) + E[(b-V)+] vanishes on a 100-point (b, s) grid."""
    worst = 0.0
    for s in np.linspace(0.05, 0.8, 10):
        law = Lognormal(-0.5 * s * s, float(s))  # mean 1
        for b in np.linspace(0.3, 1.9, 10):
            mass = float(law.cdf(b))
            lhs = mass * (lognormal_truncated_mean(law, float(b)) - b)
            worst = max(worst, abs(lhs + lognormal_put_value(1.0, float(b), float(s))))
    assert worst < 1e-12


def test_put_identity_single_point():
    law = Lognormal(-0.02, 0.2)
    lhs = float(law.cdf(1.0)) * (lognormal_truncated_mean(law, 1.0) - 1.0)
    assert lhs == pytest.approx(-lognormal_put_value(1.0, 1.0, 0.2), abs=1e-12)


# --------------------------- property-based checks ----------------------------


@given(alpha=st.floats(0.5, 5.0), beta=st.floats(0.5, 5.0),
       q=st.floats(1e-4, 1.0 - 1e-4))
@settings(max_examples=60, deadline=None)
def test_beta_roundtrip_property(alpha, beta, q):
    dist = Beta(alpha, beta)
    assert float(dist.cdf(dist.quantile(q))) == pytest.approx(q, abs=1e-9)


@given(a=st.floats(-1.0, 1.0), s=st.floats(0.05, 1.5),
       q=st.floats(1e-4, 1.0 - 1e-4))
@settings(max_examples=60, deadline=None)
def test_lognormal_roundtrip_property(a, s, q):
    dist = Lognormal(a, s)
    assert float(dist.cdf(dist.quantile(q))) == pytest.approx(q, abs=1e-9)


@given(s=st.floats(0.05, 0.9), b=st.floats(0.05, 3.0))
@settings(max_examples=80, deadline=None)
def test_put_identity_property(s, b):
    law = Lognormal(-0.5 * s * s, s)
    mass = float(law.cdf(b))
    if mass < 1e-8:
        return
    lhs = mass * (lognormal_truncated_mean(law, b) - b)
    assert abs(lhs + lognormal_put_value(1.0, b, s)) < 1e-12


# ------------------------------ validation et al. -----------------------------


@pytest.mark.parametrize("ctor", [
    lambda: Uniform(1.0, 1.0),
    lambda: Uniform(-0.5, 1.0),
    lambda: Beta(0.0, 2.0),
    lambda: Beta(2.0, -1.0),
    lambda: Lognormal(0.0, 0.0),
    lambda: EmpiricalGrid(np.array([0.0, 0.5, 0.4]), np.array([0.0, 0.5, 1.0])),
    lambda: EmpiricalGrid(np.array([0.0, 0.5, 1.0]), np.array([0.0, 0.6, 0.6])),
    lambda: EmpiricalGrid(np.array([-0.1, 0.5, 1.0]), np.array([0.0, 0.5, 1.0])),
    lambda: EmpiricalGrid(np.array([0.0, 1.0]), np.array([0.1, 1.0])),
])
def test_invalid_parameters_rejected(ctor):
    with pytest.raises(ValueError):
        ctor()


def test_lower_tail_exponents():
    assert lower_tail_exponent(Uniform(0, 1), 0.0, 1e-3) == 1.0
    assert lower_tail_exponent(Beta(2, 2), 0.0, 1e-3) == 2.0
    assert lower_tail_exponent(_empirical_example(), 0.0, 1e-3) == 1.0
    # positive CDF mass means no power-law correction
    assert lower_tail_exponent(Uniform(0, 1), 0.5, 1e-3) == 0.0
    # lognormal lower tail is steeper than any polynomial
    assert lower_tail_exponent(Lognormal(0.0, 0.3), 0.0, 1e-3) > 10.0


def test_parse_distribution_forms(tmp_path):
    assert parse_distribution("uniform(0,1)") == Uniform(0.0, 1.0)
    assert parse_distribution("beta(2, 2)") == Beta(2.0, 2.0)
    assert parse_distribution("lognormal(-0.02,0.2)") == Lognormal(-0.02, 0.2)
    csv_path = tmp_path / "law.csv"
    csv_path.write_text("x,cdf\n0.0,0.0\n0.5,0.4\n1.0,1.0\n")
    emp = parse_distribution(f"empirical({csv_path})")
    assert emp.kind == "empirical-grid"
    assert float(emp.cdf(0.5)) == pytest.approx(0.4)


@pytest.mark.parametrize("spec", ["gamma(1,1)", "uniform(0)", "uniform(a,b)",
                                  "uniform 0 1", "beta(2,2,2)"])
def test_parse_distribution_rejects(spec):
    with pytest.raises(ValueError):
        parse_distribution(spec)


def test_empirical_csv_header_checked(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("value,prob\n0,0\n1,1\n")
    with pytest.raises(ValueError, match="header"):
        parse_distribution(f"empirical({bad})")
