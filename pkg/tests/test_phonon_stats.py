import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from oracles import brute_mean, geometric_pmf, poisson_pmf
from rydpol.phonon_stats import (PhononDistribution, coherent_pmf, thermal_pmf,
                                 truncation_bound)


def test_coherent_matches_scipy_poisson():
    n = np.arange(200)
    for a in (0.3, 2.4, 6.0, 12.0):
        np.testing.assert_allclose(coherent_pmf(a, n), stats.poisson.pmf(n, a * a),
                                   rtol=1e-10, atol=1e-300)


def test_thermal_matches_scipy_geometric():
    n = np.arange(300)
    for nbar in (0.05, 0.4, 3.0, 10.0):
        # scipy's geom starts at 1: P(k) = (1-p)^(k-1) p with p = 1/(nbar+1)
        np.testing.assert_allclose(thermal_pmf(nbar, n), stats.geom.pmf(n + 1, 1 / (nbar + 1)),
                                   rtol=1e-12)


def test_large_n_has_no_overflow():
    p = coherent_pmf(20.0, np.array([400, 1000]))
    assert np.all(np.isfinite(p))


def test_zero_parameters_are_ground_state():
    for d in (PhononDistribution.thermal(0), PhononDistribution.coherent(0)):
        n, p = d.support()
        np.testing.assert_array_equal(n, [0])
        np.testing.assert_array_equal(p, [1.0])


def test_alpha_phase_irrelevant():
    assert PhononDistribution.coherent(-3.0) == PhononDistribution.coherent(3.0)


@pytest.mark.parametrize("kind,value", [("thermal", 0.4), ("thermal", 10.0),
                                        ("coherent", 2.4), ("coherent", 12.0)])
@pytest.mark.parametrize("tail", [1e-3, 1e-6, 1e-10])
def test_truncation_bound_is_minimal(kind, value, tail):
    d = getattr(PhononDistribution, kind)(value)
    big = np.arange(5000)
    p = d.pmf(big)
    n = truncation_bound(d, tail)
    assert p[n + 1:].sum() <= tail * (1 + 1e-9)
    assert n == 0 or p[n:].sum() > tail


def test_fock_and_explicit():
    f = PhononDistribution.fock(5)
    assert truncation_bound(f) == 5
    assert f.moments() == (5.0, 0.0)
    e = PhononDistribution.explicit({0: 0.5, 2: 0.5})
    assert e.moments() == (1.0, 1.0)
    assert truncation_bound(e, 0.1) == 2
    np.testing.assert_array_equal(e.pmf([0, 1, 2, 3]), [0.5, 0, 0.5, 0])


def test_explicit_validation():
    with pytest.raises(ValueError):
        PhononDistribution.explicit({0: 0.5, 1: 0.4})
    with pytest.raises(ValueError):
        PhononDistribution.explicit({-1: 1.0})
    with pytest.raises(ValueError):
        PhononDistribution.thermal(-0.1)
    with pytest.raises(ValueError):
        PhononDistribution("squeezed", 1.0)


def test_moments_match_brute_force():
    for nbar in (0.4, 3.0):
        m = brute_mean(lambda n: geometric_pmf(nbar, n), 2000)
        assert PhononDistribution.thermal(nbar).moments()[0] == pytest.approx(m, rel=1e-10)
    for a in (2.4, 6.0):
        m = brute_mean(lambda n: poisson_pmf(a * a, n), 400)
        assert PhononDistribution.coherent(a).moments()[0] == pytest.approx(m, rel=1e-12)
    assert PhononDistribution.thermal(0.4).moments()[1] == pytest.approx(0.4 * 1.4)


def test_config_round_trip():
    for d in (PhononDistribution.thermal(0.4), PhononDistribution.coherent(6.0),
              PhononDistribution.fock(3), PhononDistribution.explicit([(0, 0.25), (4, 0.75)])):
        assert PhononDistribution.from_config(d.to_config()) == d
    assert PhononDistribution.from_config({"explicit": {"1": 1.0}}) == PhononDistribution.fock(1) \
        or PhononDistribution.from_config({"explicit": {"1": 1.0}}).mean == 1.0


def test_support_is_a_copy():
    d = PhononDistribution.thermal(1.0)
    n, p = d.support()
    p[:] = 0
    assert d.support()[1].sum() > 0.99


@settings(max_examples=80, deadline=None)
@given(st.sampled_from(["thermal", "coherent"]), st.floats(0.0, 12.0),
       st.floats(1e-12, 1e-2))
def test_truncated_mass_property(kind, value, tail):
    d = getattr(PhononDistribution, kind)(value)
    n, p = d.support(tail)
    assert np.all(p >= 0)
    assert 1.0 - p.sum() <= tail * (1 + 1e-8) + 1e-15
    assert math.isclose(d.pmf(n).sum(), p.sum())
