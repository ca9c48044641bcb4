"""Disorder sampling and the log-Hoelder concentration check.

Site values are produced by a counter-based splittable construction:
every (master seed, sample index, site) triple is hashed independently
through numpy's SeedSequence, so samples are reproducible under any
parallel schedule and values at distinct sites come from independent
streams.  At most three spatial coordinates per particle are supported
by the hashing layout, which covers d <= 3.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .lattice import InteractionSpec, Point

_U01_SCALE = 2.0**-64


class AnalyticUnavailable(ValueError):
    """Raised when no closed-form concentration bound exists for a kind."""


class DisorderCoverageError(KeyError):
    """Raised when a Hamiltonian assembly needs a site the sample lacks."""


@dataclass(frozen=True)
class DistributionSpec:
    """Marginal law of the i.i.d. potential, scaled by ``amplitude``.

    ``q0`` and ``beta`` parametrize the concentration condition checked by
    :func:`log_holder_ok`: the probability of any window of width
    exp(-L**beta) must not exceed L**-q0.
    """

    kind: str
    a: float = 0.0
    b: float = 1.0
    p: float = 0.5
    levels: tuple = (0.0, 1.0)
    values: tuple = ()
    weights: tuple = ()
    value: float = 0.0
    amplitude: float = 1.0
    q0: float = 20.0
    beta: float = 0.5
    require_nonnegative: bool = True

    def __post_init__(self):
        if self.kind not in ("uniform", "bernoulli", "discrete", "constant"):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.amplitude < 0:
            raise ValueError("amplitude must be nonnegative")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if self.kind == "uniform" and not self.a < self.b:
            raise ValueError("uniform distribution requires a < b")
        if self.kind == "bernoulli":
            if not 0 <= self.p <= 1:
                raise ValueError("bernoulli probability must lie in [0, 1]")
            if not self.levels[0] < self.levels[1]:
                raise ValueError("bernoulli levels must satisfy v0 < v1")
        if self.kind == "discrete":
            if len(self.values) != len(self.weights) or not self.values:
                raise ValueError("discrete distribution needs matching values/weights")
            if any(w < 0 for w in self.weights):
                raise ValueError("discrete weights must be nonnegative")
            if abs(sum(self.weights) - 1.0) > 1e-12:
                raise ValueError("discrete weights must sum to 1")
        if self.require_nonnegative and self._support_min() < 0:
            raise ValueError("distribution produces negative values")
        object.__setattr__(self, "levels", tuple(float(v) for v in self.levels))
        object.__setattr__(self, "values", tuple(float(v) for v in self.values))
        object.__setattr__(self, "weights", tuple(float(w) for w in self.weights))

    def _support_min(self) -> float:
        base = {
            "uniform": self.a,
            "bernoulli": self.levels[0],
            "discrete": min(self.values) if self.values else 0.0,
            "constant": self.value,
        }[self.kind]
        return self.amplitude * base

    @classmethod
    def uniform(cls, a: float = 0.0, b: float = 1.0, **kw) -> "DistributionSpec":
        return cls(kind="uniform", a=a, b=b, **kw)

    @classmethod
    def bernoulli(cls, p: float = 0.5, levels=(0.0, 1.0), **kw) -> "DistributionSpec":
        return cls(kind="bernoulli", p=p, levels=tuple(levels), **kw)

    @classmethod
    def discrete(cls, values, weights, **kw) -> "DistributionSpec":
        return cls(kind="discrete", values=tuple(values), weights=tuple(weights), **kw)

    @classmethod
    def constant(cls, value: float = 0.0, **kw) -> "DistributionSpec":
        return cls(kind="constant", value=value, **kw)

    def from_u01(self, u: float) -> float:
        """Map a uniform[0,1) draw to a scaled potential value."""
        if self.kind == "uniform":
            base = self.a + (self.b - self.a) * u
        elif self.kind == "bernoulli":
            base = self.levels[1] if u < self.p else self.levels[0]
        elif self.kind == "discrete":
            acc = 0.0
            base = self.values[-1]
            for v, w in zip(self.values, self.weights):
                acc += w
                if u < acc:
                    base = v
                    break
        else:
            base = self.value
        return self.amplitude * base

    def support(self) -> Optional[tuple]:
        """((value, prob), ...) for finite-support kinds, else None."""
        if self.kind == "bernoulli":
            pts = [
                (self.amplitude * self.levels[0], 1.0 - self.p),
                (self.amplitude * self.levels[1], self.p),
            ]
        elif self.kind == "discrete":
            pts = [
                (self.amplitude * v, w) for v, w in zip(self.values, self.weights)
            ]
        elif self.kind == "constant" or self.amplitude == 0.0:
            pts = [(self.amplitude * self.value if self.kind == "constant" else 0.0, 1.0)]
        else:
            return None
        merged: dict = {}
        for v, w in pts:
            merged[v] = merged.get(v, 0.0) + w
        return tuple(sorted(merged.items()))

    def support_bits(self, n_sites: int) -> Optional[float]:
        """Enumeration cost in bits, or None for continuous kinds."""
        sup = self.support()
        if sup is None:
            return None
        effective = [v for v, w in sup if w > 0]
        if len(effective) <= 1:
            return 0.0
        return n_sites * math.log2(len(effective))


@dataclass
class DisorderSample:
    """One realization of the potential on a finite site set."""

    site_values: dict
    seed: int
    sample_index: int

    def __getitem__(self, site: Point) -> float:
        try:
            return self.site_values[site]
        except KeyError:
            raise DisorderCoverageError(
                f"sample (seed={self.seed}, index={self.sample_index}) has no "
                f"value at site {site}"
            ) from None

    def sites(self):
        return self.site_values.keys()


def _zigzag(n: int) -> int:
    return 2 * n if n >= 0 else -2 * n - 1


def site_u01(seed: int, index: int, site: Point) -> float:
    """Uniform[0,1) draw attached to (seed, index, site), order-independent."""
    if len(site) > 3:
        raise ValueError("site hashing supports at most 3 coordinates (d <= 3)")
    key = (int(index),) + tuple(_zigzag(int(c)) for c in site)
    word = np.random.SeedSequence(entropy=int(seed), spawn_key=key).generate_state(
        1, dtype=np.uint64
    )[0]
    return float(word) * _U01_SCALE


def sample_potential(sites, dist: DistributionSpec, seed: int, index: int) -> DisorderSample:
    """Draw the potential on ``sites``; deterministic given (seed, index)."""
    values = {s: dist.from_u01(site_u01(seed, index, s)) for s in sites}
    return DisorderSample(site_values=values, seed=int(seed), sample_index=int(index))


def resample_sites(sample: DisorderSample, sites, dist: DistributionSpec, new_index: int) -> DisorderSample:
    """Copy of ``sample`` with the listed sites redrawn under ``new_index``."""
    values = dict(sample.site_values)
    for s in sites:
        values[s] = dist.from_u01(site_u01(sample.seed, new_index, s))
    return DisorderSample(values, sample.seed, sample.sample_index)


def constant_sample(sites, value: float = 0.0) -> DisorderSample:
    return DisorderSample({s: float(value) for s in sites}, seed=0, sample_index=0)


def interaction_value(x1: Point, x2: Point, u: InteractionSpec) -> float:
    """Interaction energy of the ordered pair (x1, x2)."""
    if len(x1) != len(x2):
        raise ValueError("interaction arguments must share a dimension")
    return u.value(x1, x2)


def concentration_supremum(dist: DistributionSpec, epsilon: float) -> float:
    """Exact sup over a of P{V in [a, a + epsilon]} for the supported kinds."""
    if epsilon <= 0:
        raise ValueError("epsilon must be positive")
    g = dist.amplitude
    if dist.kind == "constant" or g == 0.0:
        return 1.0
    if dist.kind == "uniform":
        return min(1.0, epsilon / (g * (dist.b - dist.a)))
    sup = dist.support()
    if sup is None:
        raise AnalyticUnavailable(dist.kind)
    vals = [v for v, w in sup]
    wts = [w for v, w in sup]
    best = 0.0
    for i, lo in enumerate(vals):
        acc = 0.0
        for v, w in zip(vals[i:], wts[i:]):
            if v <= lo + epsilon:
                acc += w
        best = max(best, acc)
    return best


def concentration_supremum_empirical(
    dist: DistributionSpec, epsilon: float, n_samples: int = 100_000, seed: int = 0
) -> float:
    """Histogram fallback for kinds without a closed form."""
    draws = np.sort(
        [dist.from_u01(site_u01(seed, i, (0,))) for i in range(n_samples)]
    )
    hi = np.searchsorted(draws, draws + epsilon, side="right")
    return float(np.max(hi - np.arange(n_samples)) / n_samples)


def concentration(dist: DistributionSpec, epsilon: float, seed: int = 0) -> float:
    try:
        return concentration_supremum(dist, epsilon)
    except AnalyticUnavailable:
        return concentration_supremum_empirical(dist, epsilon, seed=seed)


def log_holder_ok(dist: DistributionSpec, L: float) -> bool:
    """Check the concentration condition at scale L.

    The window width is exp(-L**beta) and the required bound L**-q0, with
    beta and q0 taken from the distribution spec.
    """
    eps = math.exp(-(L ** dist.beta))
    return concentration(dist, eps) <= L ** (-dist.q0)
