import math

import mpmath as mp
import numpy as np
import pytest
from scipy import integrate
from scipy.special import erfc

from d2dcovert import Strategy, SystemParams
from d2dcovert.interference import (
    InterferenceCdf,
    interference_cdf,
    interference_laplace,
    interference_nu,
    stable_cdf_table,
)

# nu at 15/15 dBm and the default parameters, from pi^2/2 * (0.05 + 0.1) * sqrt(10^-1.5) in 30-digit arithmetic
NU_15_15 = 0.131631857187650554891924176389


def levy_cdf(nu, t):
    """alpha = 4: the transform exp(-nu sqrt(s)) inverts to erfc(nu / (2 sqrt(t)))."""
    return erfc(nu / (2.0 * np.sqrt(t)))


def talbot_cdf(nu, alpha, t):
    mp.mp.dps = 30
    val = mp.invertlaplace(lambda s: mp.exp(-nu * s ** (2.0 / alpha)) / s, t, method="talbot")
    return float(val)


def test_nu_matches_direct_substitution(defaults, mid_strategy):
    assert interference_nu(defaults, mid_strategy) == pytest.approx(NU_15_15, rel=1e-13)


def test_laplace_examples(defaults, mid_strategy):
    assert interference_laplace(defaults, mid_strategy, 0.0) == 1.0
    assert interference_laplace(defaults, mid_strategy, 1.0) == pytest.approx(math.exp(-NU_15_15), rel=1e-13)
    empty = SystemParams(lambda_d=0.0, lambda_j=0.0)
    assert interference_laplace(empty, mid_strategy, 123.0) == 1.0


def test_laplace_decreasing(defaults, mid_strategy):
    s = np.geomspace(1e-3, 1e6, 40)
    v = np.asarray(interference_laplace(defaults, mid_strategy, s))
    assert np.all(np.diff(v) < 0) and np.all((v > 0) & (v <= 1))


@pytest.mark.parametrize("p_dbm", [(0.0, 0.0), (15.0, 15.0), (30.0, 5.0), (3.0, 27.0)])
def test_direct_inversion_erfc_oracle(defaults, p_dbm):
    cdf = InterferenceCdf.from_model(defaults, Strategy.from_dbm(*p_dbm))
    t = np.geomspace(1e-9, 1.0, 30)
    got = interference_cdf(cdf, t)
    assert np.max(np.abs(got - levy_cdf(cdf.nu, t))) < 1e-6


def test_table_erfc_oracle():
    table = stable_cdf_table(4.0)
    for nu in (1e-4, 0.0316, 0.13, 2.0):
        t = np.geomspace(1e-14, 1e4, 400)
        assert np.max(np.abs(table.cdf(nu, t) - levy_cdf(nu, t))) < 1e-7


@pytest.mark.parametrize("alpha", [2.5, 3.0, 6.0])
def test_inversion_other_alpha_talbot(alpha):
    nu = 0.2
    cdf = InterferenceCdf(nu, alpha)
    table = stable_cdf_table(alpha)
    for kappa in (0.05, 0.5, 1.5):
        t = (nu / kappa) ** (alpha / 2)
        ref = talbot_cdf(nu, alpha, t)
        assert interference_cdf(cdf, t) == pytest.approx(ref, abs=1e-7)
        assert float(table.cdf(nu, t)) == pytest.approx(ref, abs=1e-7)


@pytest.mark.parametrize("alpha", [3.0, 4.0, 5.0])
def test_laplace_of_inverted_cdf(alpha):
    # L(s) = s * int exp(-s t) F(t) dt, computed in log t
    nu = 0.15
    table = stable_cdf_table(alpha)
    for s in (1e-2, 0.3, 1.0, 10.0, 1e3):
        f = lambda z: s * math.exp(z - s * math.exp(z)) * float(table.cdf(nu, math.exp(z)))
        lo, hi = math.log(table.lower_support(nu)), math.log(60.0 / s)
        val, _ = integrate.quad(f, lo, hi, limit=400, epsabs=1e-12, epsrel=1e-10)
        assert val == pytest.approx(math.exp(-nu * s ** (2 / alpha)), abs=1e-4)


def test_cdf_monotone_and_limits(defaults, mid_strategy):
    cdf = InterferenceCdf.from_model(defaults, mid_strategy)
    t = np.geomspace(1e-8, 1e3, 60)
    f = interference_cdf(cdf, t)
    assert np.all(np.diff(f) >= -1e-9)
    assert interference_cdf(cdf, 0.0) == 0.0
    assert interference_cdf(cdf, 1e12) == pytest.approx(1.0, abs=1e-6)
    with pytest.raises(ValueError):
        interference_cdf(cdf, -1.0)


def test_table_monotone_and_support():
    for alpha in (2.5, 4.0, 6.0):
        table = stable_cdf_table(alpha)
        kappa = np.geomspace(1e-9, 1e3, 2000)
        phi = table(kappa)
        assert np.all(np.diff(phi) <= 1e-9)
        assert float(table.cdf(0.3, table.lower_support(0.3))) < 1e-15
