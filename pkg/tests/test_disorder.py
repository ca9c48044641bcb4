import math

import numpy as np
import pytest

from anderson2p.disorder import (
    AnalyticUnavailable,
    DisorderCoverageError,
    DistributionSpec,
    concentration,
    concentration_supremum,
    concentration_supremum_empirical,
    interaction_value,
    log_holder_ok,
    resample_sites,
    sample_potential,
)
from anderson2p.lattice import InteractionSpec

SITES = [(x,) for x in range(-3, 4)]


def test_constant_zero():
    s = sample_potential(SITES, DistributionSpec.constant(0.0), seed=1, index=0)
    assert all(s[x] == 0.0 for x in SITES)


def test_bernoulli_degenerate():
    s = sample_potential(SITES, DistributionSpec.bernoulli(p=1.0), seed=1, index=0)
    assert all(s[x] == 1.0 for x in SITES)


def test_determinism():
    dist = DistributionSpec.uniform(0.0, 1.0)
    a = sample_potential(SITES, dist, seed=42, index=3)
    b = sample_potential(SITES, dist, seed=42, index=3)
    assert a.site_values == b.site_values
    c = sample_potential(SITES, dist, seed=42, index=4)
    assert a.site_values != c.site_values


def test_site_values_independent_of_site_set():
    dist = DistributionSpec.uniform(0.0, 1.0)
    a = sample_potential(SITES, dist, seed=7, index=0)
    b = sample_potential(SITES[2:5], dist, seed=7, index=0)
    for x in SITES[2:5]:
        assert a[x] == b[x]


def test_missing_site_error():
    s = sample_potential(SITES, DistributionSpec.uniform(), seed=0, index=0)
    with pytest.raises(DisorderCoverageError):
        s[(99,)]


def test_resample_sites_touches_only_listed():
    dist = DistributionSpec.uniform(0.0, 1.0)
    s = sample_potential(SITES, dist, seed=5, index=0)
    t = resample_sites(s, SITES[:2], dist, new_index=10**6)
    assert all(t[x] == s[x] for x in SITES[2:])
    assert all(t[x] != s[x] for x in SITES[:2])


def test_amplitude_scales_values():
    d1 = DistributionSpec.uniform(0.0, 1.0, amplitude=1.0)
    d4 = DistributionSpec.uniform(0.0, 1.0, amplitude=4.0)
    a = sample_potential(SITES, d1, seed=9, index=0)
    b = sample_potential(SITES, d4, seed=9, index=0)
    for x in SITES:
        assert b[x] == pytest.approx(4.0 * a[x], rel=1e-15)


def test_independence_proxy():
    dist = DistributionSpec.uniform(0.0, 1.0)
    n = 10_000
    a = np.empty(n)
    b = np.empty(n)
    for i in range(n):
        s = sample_potential([(0,), (1,)], dist, seed=11, index=i)
        a[i] = s[(0,)]
        b[i] = s[(1,)]
    corr = np.corrcoef(a, b)[0, 1]
    assert abs(corr) < 0.05


def test_interaction_value_short_range():
    u0 = InteractionSpec.zero()
    assert interaction_value((0,), (1,), u0) == 0.0
    u = InteractionSpec(r0=1, profile=(2.0, 2.0))
    assert interaction_value((3,), (3,), u) == 2.0
    assert interaction_value((0,), (2,), u) == 0.0  # just past the range


def test_concentration_uniform():
    dist = DistributionSpec.uniform(0.0, 1.0)
    eps = math.exp(-4.0)
    assert concentration_supremum(dist, eps) == pytest.approx(eps, rel=1e-12)
    assert concentration_supremum(dist, 2.0) == 1.0


def test_concentration_bernoulli_and_constant():
    dist = DistributionSpec.bernoulli(0.5)
    assert concentration_supremum(dist, 0.5) == pytest.approx(0.5)
    assert concentration_supremum(dist, 1.5) == 1.0
    assert concentration_supremum(DistributionSpec.constant(3.0), 0.1) == 1.0


def test_concentration_discrete_window():
    dist = DistributionSpec.discrete((0.0, 0.3, 1.0), (0.25, 0.25, 0.5))
    assert concentration_supremum(dist, 0.4) == pytest.approx(0.5)
    assert concentration_supremum(dist, 1.1) == pytest.approx(1.0)


def test_concentration_empirical_close_to_analytic():
    dist = DistributionSpec.uniform(0.0, 1.0)
    est = concentration_supremum_empirical(dist, 0.05, n_samples=20_000, seed=3)
    assert est == pytest.approx(0.05, abs=0.01)
    assert concentration(dist, 0.05) == pytest.approx(0.05, rel=1e-12)


def test_log_holder_grid_uniform():
    # exp(-sqrt(L)) <= L^-q0 needs sqrt(L) >= q0*ln(L); for q0 = 4 the
    # crossover sits near L = 700, so the condition holds on a grid beyond it
    dist = DistributionSpec.uniform(0.0, 1.0, q0=4.0, beta=0.5)
    assert not log_holder_ok(dist, 300)
    flags = [log_holder_ok(dist, L) for L in range(800, 3000, 200)]
    assert all(flags)
    assert not log_holder_ok(DistributionSpec.constant(1.0, q0=4.0), 1000)


def test_support_bits():
    assert DistributionSpec.bernoulli(0.5).support_bits(10) == pytest.approx(10.0)
    assert DistributionSpec.uniform().support_bits(3) is None
    assert DistributionSpec.constant(2.0).support_bits(50) == 0.0
    three = DistributionSpec.discrete((0, 1, 2), (0.2, 0.3, 0.5))
    assert three.support_bits(4) == pytest.approx(4 * math.log2(3))


def test_validation_errors():
    with pytest.raises(ValueError):
        DistributionSpec.uniform(1.0, 0.0)
    with pytest.raises(ValueError):
        DistributionSpec.bernoulli(1.5)
    with pytest.raises(ValueError):
        DistributionSpec.discrete((0, 1), (0.5, 0.6))
    with pytest.raises(ValueError):
        DistributionSpec.uniform(-1.0, 1.0)  # negative support rejected by default
    DistributionSpec.uniform(-1.0, 1.0, require_nonnegative=False)
