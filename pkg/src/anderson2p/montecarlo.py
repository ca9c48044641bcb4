"""Seeded estimation of the probabilistic cube-classification events.

Each estimator evaluates one event family on canonical cube geometry:

* W1: a cube fails complete non-resonance at a fixed energy;
* W2: some energy makes both cubes of a distant pair fail it at once;
* S0: some energy in the interval makes the initial cube singular;
* DSk: some energy makes both cubes of a distant scale-k pair singular;
* LIFSHITZ: the lowest eigenvalue falls below 2*C/sqrt(L).

Sampling is counter-based: sample i of a run is a pure function of
(seed, i), so estimates are independent of the worker schedule and chunked
partial counts reduce to the same totals for any worker count.  On finite
disorder supports small enough to enumerate (at most ``EXHAUSTIVE_BITS``
bits) the estimators switch to exact weighted enumeration.

Probability bounds of the form L**-q or L**-2p are attached to each result
for comparison, but they are astronomically small at honest exponents, so
``bound_satisfied`` degrades to None (not assessable) whenever the bound is
finer than the Monte Carlo resolution 1/n_samples.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from multiprocessing import get_context
from typing import Optional

import numpy as np
from scipy.stats import beta as beta_dist

from . import spectral
from .disorder import DistributionSpec, sample_potential
from .hamiltonian import assemble, l1_distance_matrix
from .lattice import (
    Cube,
    InteractionSpec,
    cubes_ell_distant,
    is_interactive,
    projection_union_sites,
)
from .msa import (
    CubeClassifier,
    EnergyInterval,
    MsaParameters,
    MsaSchedule,
    energy_grid,
    open_interval_unions_overlap,
)

EXHAUSTIVE_BITS = 20.0
FORCED_EXHAUSTIVE_BITS = 25.0
_CHUNK = 1024


@dataclass
class EstimatorResult:
    """Probability estimate with its exact binomial confidence interval."""

    event_name: str
    estimate: float
    n_samples: int
    ci95: tuple
    paper_bound: Optional[float]
    bound_satisfied: Optional[bool]
    seed: int
    mode: str
    L: Optional[int] = None
    k: Optional[int] = None
    detail: dict = field(default_factory=dict)

    def to_record(self) -> dict:
        return {
            "event": self.event_name,
            "L": self.L,
            "k": self.k,
            "estimate": self.estimate,
            "ci_lo": self.ci95[0],
            "ci_hi": self.ci95[1],
            "n": self.n_samples,
            "bound": self.paper_bound,
            "bound_satisfied": self.bound_satisfied,
            "mode": self.mode,
            "seed": self.seed,
            **self.detail,
        }


def clopper_pearson(k: int, n: int, alpha: float = 0.05) -> tuple:
    """Exact binomial confidence interval for k successes out of n."""
    if n <= 0:
        raise ValueError("sample count must be positive")
    lo = 0.0 if k == 0 else float(beta_dist.ppf(alpha / 2, k, n - k + 1))
    hi = 1.0 if k == n else float(beta_dist.ppf(1 - alpha / 2, k + 1, n - k))
    return (lo, hi)


# -- canonical geometry -----------------------------------------------------


def _diag_center(offset: int, d: int) -> tuple:
    one = (offset,) + (0,) * (d - 1)
    return one + one


def _off_diag_center(gap: int, d: int) -> tuple:
    return (0,) * d + (gap,) + (0,) * (d - 1)


def canonical_pair(kind: str, L: int, d: int, r0: int, separation: Optional[int] = None):
    """Extremal distant pair of two-particle cubes of the requested kind.

    Interactive cubes sit on the diagonal, separated along the first
    coordinate; non-interactive ones share the first projection and are
    pushed off the diagonal by just over 2L + r0.  The default separation
    8L + 1 is the smallest distance that still counts as L-distant.
    """
    s = separation if separation is not None else 8 * L + 1
    if s <= 8 * L:
        raise ValueError(f"separation {s} does not make the pair {L}-distant")
    a = 2 * L + r0 + 1
    if kind == "I":
        pair = Cube(_diag_center(0, d), L, d), Cube(_diag_center(s, d), L, d)
    elif kind == "NI":
        pair = (
            Cube(_off_diag_center(a, d), L, d),
            Cube(_off_diag_center(a + s, d), L, d),
        )
    elif kind == "mixed":
        b = max(s, a)
        pair = Cube(_off_diag_center(b, d), L, d), Cube(_diag_center(0, d), L, d)
    else:
        raise ValueError(f"unknown pair kind {kind!r}")
    _validate_pair(pair, kind, L, r0)
    return pair


def _validate_pair(pair, kind: str, L: int, r0: int):
    c1, c2 = pair
    if not cubes_ell_distant(c1, c2, L, "center"):
        raise ValueError("constructed pair is not L-distant")
    kinds = {"I": (True, True), "NI": (False, False), "mixed": (False, True)}[kind]
    got = (is_interactive(c1, r0), is_interactive(c2, r0))
    if got != kinds:
        raise ValueError(
            f"pair kind {kind!r} unconstructible at L={L}, r0={r0}: got "
            f"interactive flags {got}"
        )


# -- tasks and events ---------------------------------------------------------


@dataclass(frozen=True)
class _Task:
    kind: str
    cubes: tuple
    sites: tuple
    dist: DistributionSpec
    interaction: InteractionSpec
    params: MsaParameters
    energy: Optional[float] = None
    interval: Optional[EnergyInterval] = None
    m: Optional[float] = None
    threshold: Optional[float] = None


def _event_w1(task: _Task, sample) -> bool:
    cl = CubeClassifier(task.cubes[0], sample, task.interaction, task.params)
    return not cl.is_cnr(task.energy)


def _event_w2(task: _Task, sample) -> bool:
    sets = [
        CubeClassifier(c, sample, task.interaction, task.params).resonance_set()
        for c in task.cubes
    ]
    return open_interval_unions_overlap(sets[0], sets[1])


def _singular_anywhere(task: _Task, sample) -> np.ndarray:
    classifiers = [
        CubeClassifier(c, sample, task.interaction, task.params) for c in task.cubes
    ]
    spectra = [
        (spectral.eigenvalues(cl.ham()), cl.cube.radius) for cl in classifiers
    ]
    grid = energy_grid(task.interval, spectra, task.params.beta)
    flags = classifiers[0].singular_flags(grid, task.m)
    for cl in classifiers[1:]:
        flags = flags & cl.singular_flags(grid, task.m)
    return flags


def _event_s0(task: _Task, sample) -> bool:
    return bool(_singular_anywhere(task, sample).any())


def _event_dsk(task: _Task, sample) -> bool:
    return bool(_singular_anywhere(task, sample).any())


def _event_lifshitz(task: _Task, sample) -> bool:
    h = assemble(task.cubes[0], sample, task.interaction)
    e0, _ = spectral.lowest_eigenpair(h)
    return e0 <= task.threshold


_EVENTS = {
    "w1": _event_w1,
    "w2": _event_w2,
    "s0": _event_s0,
    "dsk": _event_dsk,
    "lifshitz": _event_lifshitz,
}


def evaluate_event(task: _Task, sample) -> bool:
    return _EVENTS[task.kind](task, sample)


# -- sampling drivers ---------------------------------------------------------


def _mc_chunk(args) -> int:
    task, seed, lo, hi = args
    event = _EVENTS[task.kind]
    count = 0
    for i in range(lo, hi):
        if event(task, sample_potential(task.sites, task.dist, seed, i)):
            count += 1
    return count


def _config_sample(task: _Task, support, config_index: int):
    values = {}
    weight = 1.0
    idx = config_index
    for site in task.sites:
        q = idx % len(support)
        idx //= len(support)
        v, w = support[q]
        values[site] = v
        weight *= w
    from .disorder import DisorderSample

    return DisorderSample(values, seed=0, sample_index=config_index), weight


def _ex_chunk(args) -> float:
    task, support, lo, hi = args
    event = _EVENTS[task.kind]
    total = 0.0
    for idx in range(lo, hi):
        sample, weight = _config_sample(task, support, idx)
        if weight > 0.0 and event(task, sample):
            total += weight
    return total


def _map_chunks(fn, jobs, workers: int):
    if workers <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with get_context("fork").Pool(processes=workers) as pool:
        return pool.map(fn, jobs)


def _resolve_mode(mode: str, dist: DistributionSpec, n_sites: int) -> str:
    bits = dist.support_bits(n_sites)
    if mode == "auto":
        return "exhaustive" if bits is not None and bits <= EXHAUSTIVE_BITS else "montecarlo"
    if mode in ("mc", "montecarlo"):
        return "montecarlo"
    if mode == "exhaustive":
        if bits is None:
            raise ValueError("exhaustive mode needs a finite-support distribution")
        if bits > FORCED_EXHAUSTIVE_BITS:
            raise ValueError(
                f"enumeration would take {bits:.1f} bits, above the "
                f"{FORCED_EXHAUSTIVE_BITS:.0f}-bit cap"
            )
        return "exhaustive"
    raise ValueError(f"unknown mode {mode!r}")


def _run_estimator(
    event_name: str,
    task: _Task,
    n_samples: int,
    seed: int,
    mode: str,
    workers: int,
    bound: Optional[float],
) -> EstimatorResult:
    if n_samples < 1:
        raise ValueError("n_samples must be at least 1")
    resolved = _resolve_mode(mode, task.dist, len(task.sites))
    if resolved == "exhaustive":
        support = task.dist.support()
        n_configs = len(support) ** len(task.sites)
        jobs = [
            (task, support, lo, min(lo + _CHUNK, n_configs))
            for lo in range(0, n_configs, _CHUNK)
        ]
        parts = _map_chunks(_ex_chunk, jobs, workers)
        estimate = float(sum(parts))  # chunk order is fixed, reduction exact
        estimate = min(1.0, max(0.0, estimate))
        ci = (estimate, estimate)
        n_eff = n_configs
    else:
        jobs = [
            (task, seed, lo, min(lo + _CHUNK, n_samples))
            for lo in range(0, n_samples, _CHUNK)
        ]
        favorable = int(sum(_map_chunks(_mc_chunk, jobs, workers)))
        estimate = favorable / n_samples
        ci = clopper_pearson(favorable, n_samples)
        n_eff = n_samples
    satisfied: Optional[bool]
    if bound is None:
        satisfied = None
    elif resolved == "montecarlo" and bound < 1.0 / n_samples:
        satisfied = None
    else:
        satisfied = estimate < bound
    return EstimatorResult(
        event_name=event_name,
        estimate=estimate,
        n_samples=n_eff,
        ci95=ci,
        paper_bound=bound,
        bound_satisfied=satisfied,
        seed=seed,
        mode=resolved,
    )


def _pair_sites(cubes) -> tuple:
    sites: set = set()
    for c in cubes:
        sites |= projection_union_sites(c) if c.is_two_particle else set(c.sites())
    return tuple(sorted(sites))


# -- public estimators --------------------------------------------------------


def estimate_w1(
    L: int,
    E: float,
    dist: DistributionSpec,
    interaction: InteractionSpec,
    params: MsaParameters,
    n_samples: int,
    seed: int,
    center: Optional[tuple] = None,
    mode: str = "auto",
    workers: int = 1,
) -> EstimatorResult:
    """Probability that the cube is not completely non-resonant at E."""
    if L < 2:
        raise ValueError("W1 needs L >= 2")
    cube = Cube(center if center is not None else _diag_center(0, params.d), L, params.d)
    task = _Task(
        kind="w1",
        cubes=(cube,),
        sites=_pair_sites((cube,)),
        dist=dist,
        interaction=interaction,
        params=params,
        energy=float(E),
    )
    res = _run_estimator("W1", task, n_samples, seed, mode, workers, float(L) ** -params.q)
    res.L = L
    res.detail = {"energy": float(E)}
    return res


def estimate_w2(
    L: int,
    pair_separation: Optional[int],
    dist: DistributionSpec,
    interaction: InteractionSpec,
    params: MsaParameters,
    n_samples: int,
    seed: int,
    centers: Optional[tuple] = None,
    mode: str = "auto",
    workers: int = 1,
) -> EstimatorResult:
    """Probability that some energy defeats complete non-resonance on both
    cubes of an L-distant pair simultaneously (exact over the energy axis,
    via resonance-interval intersection)."""
    if L < 2:
        raise ValueError("W2 needs L >= 2")
    if centers is not None:
        cubes = tuple(Cube(c, L, params.d) for c in centers)
        if not cubes_ell_distant(cubes[0], cubes[1], L, params.distant_mode):
            raise ValueError("supplied centers are not L-distant")
    else:
        cubes = canonical_pair("I", L, params.d, interaction.r0, pair_separation)
    task = _Task(
        kind="w2",
        cubes=cubes,
        sites=_pair_sites(cubes),
        dist=dist,
        interaction=interaction,
        params=params,
    )
    res = _run_estimator("W2", task, n_samples, seed, mode, workers, float(L) ** -params.q)
    res.L = L
    res.detail = {"centers": [list(c.center) for c in cubes]}
    return res


def estimate_s0(
    L0: int,
    interval: EnergyInterval,
    m0: float,
    dist: DistributionSpec,
    interaction: InteractionSpec,
    n_samples: int,
    seed: int,
    params: Optional[MsaParameters] = None,
    center: Optional[tuple] = None,
    mode: str = "auto",
    workers: int = 1,
) -> EstimatorResult:
    """Probability that some energy in the interval makes the initial-scale
    cube singular at mass m0."""
    if L0 < 2:
        raise ValueError("S0 needs L0 >= 2")
    params = params or MsaParameters()
    cube = Cube(center if center is not None else _diag_center(0, params.d), L0, params.d)
    task = _Task(
        kind="s0",
        cubes=(cube,),
        sites=_pair_sites((cube,)),
        dist=dist,
        interaction=interaction,
        params=params,
        interval=interval,
        m=float(m0),
    )
    res = _run_estimator(
        "S0", task, n_samples, seed, mode, workers, float(L0) ** (-2 * params.p)
    )
    res.L = L0
    res.k = 0
    res.detail = {"m": float(m0), "interval": [interval.e_low, interval.e_high]}
    return res


def estimate_dsk(
    k: int,
    schedule: MsaSchedule,
    interval: EnergyInterval,
    pair_kind: str,
    dist: DistributionSpec,
    interaction: InteractionSpec,
    params: MsaParameters,
    n_samples: int,
    seed: int,
    centers: Optional[tuple] = None,
    mode: str = "auto",
    workers: int = 1,
) -> EstimatorResult:
    """Probability that some energy in the interval makes both cubes of an
    L_k-distant pair of the requested kind singular at mass m_k."""
    if not 0 <= k < len(schedule.lengths):
        raise ValueError(f"scale index {k} outside the schedule")
    L = schedule.lengths[k]
    m = schedule.masses[k]
    if centers is not None:
        cubes = tuple(Cube(c, L, params.d) for c in centers)
        _validate_pair(cubes, pair_kind, L, interaction.r0)
    else:
        cubes = canonical_pair(pair_kind, L, params.d, interaction.r0)
    task = _Task(
        kind="dsk",
        cubes=cubes,
        sites=_pair_sites(cubes),
        dist=dist,
        interaction=interaction,
        params=params,
        interval=interval,
        m=float(m),
    )
    res = _run_estimator(
        "DSk", task, n_samples, seed, mode, workers, float(L) ** (-2 * params.p)
    )
    res.L = L
    res.k = k
    res.detail = {
        "m": float(m),
        "pair_kind": pair_kind,
        "centers": [list(c.center) for c in cubes],
    }
    return res


def estimate_lifshitz(
    L0: int,
    C: float,
    dist: DistributionSpec,
    particle_kind: str,
    n_samples: int,
    seed: int,
    d: int = 1,
    interaction: Optional[InteractionSpec] = None,
    mode: str = "auto",
    workers: int = 1,
) -> EstimatorResult:
    """Probability that the lowest eigenvalue drops below 2*C/sqrt(L0).

    No closed-form bound is attached: the matching tail estimate involves an
    unknown constant, so results are meant for trend analysis across L0.
    """
    if particle_kind not in ("one", "two"):
        raise ValueError("particle_kind must be 'one' or 'two'")
    interaction = interaction or InteractionSpec.zero()
    dim = d if particle_kind == "one" else 2 * d
    cube = Cube((0,) * dim, L0, d)
    task = _Task(
        kind="lifshitz",
        cubes=(cube,),
        sites=_pair_sites((cube,)),
        dist=dist,
        interaction=interaction,
        params=MsaParameters(d=d),
        threshold=2.0 * C * L0**-0.5,
    )
    res = _run_estimator("LIFSHITZ", task, n_samples, seed, mode, workers, None)
    res.L = L0
    res.detail = {"threshold": task.threshold, "C": float(C), "particles": particle_kind}
    return res


# -- exhaustive oracles for structure checks ----------------------------------


def exhaustive_indicator_correlation(
    cube_x: Cube,
    cube_y: Cube,
    E: float,
    m: float,
    dist: DistributionSpec,
    interaction: InteractionSpec,
    params: MsaParameters,
) -> float:
    """Exact correlation of the two singularity indicators at fixed (E, m).

    Enumerates the joint disorder space with exact rational weights, so
    independent indicators (disjoint projections) yield exactly zero.
    """
    support = dist.support()
    if support is None:
        raise ValueError("exact correlation needs a finite-support distribution")
    sites = _pair_sites((cube_x, cube_y))
    bits = dist.support_bits(len(sites))
    if bits is None or bits > FORCED_EXHAUSTIVE_BITS:
        raise ValueError("joint disorder space too large to enumerate")
    task = _Task(
        kind="s0",
        cubes=(cube_x, cube_y),
        sites=sites,
        dist=dist,
        interaction=interaction,
        params=params,
    )
    frac_support = [(v, Fraction(w)) for v, w in support]
    e_a = e_b = e_ab = Fraction(0)
    n_configs = len(support) ** len(sites)
    for idx in range(n_configs):
        sample, _ = _config_sample(task, support, idx)
        weight = Fraction(1)
        j = idx
        for _ in sites:
            weight *= frac_support[j % len(support)][1]
            j //= len(support)
        if weight == 0:
            continue
        a = CubeClassifier(cube_x, sample, interaction, params).is_singular(E, m)
        b = CubeClassifier(cube_y, sample, interaction, params).is_singular(E, m)
        if a:
            e_a += weight
        if b:
            e_b += weight
        if a and b:
            e_ab += weight
    var_a = e_a - e_a * e_a
    var_b = e_b - e_b * e_b
    if var_a == 0 or var_b == 0:
        raise ValueError("degenerate indicator: correlation undefined")
    cov = e_ab - e_a * e_b
    return float(cov) / math.sqrt(float(var_a) * float(var_b))


# -- Combes-Thomas verification ------------------------------------------------


@dataclass
class CtReport:
    n_instances: int
    n_energies: int
    n_pairs_checked: int
    violations: int
    worst_margin: float
    seed: int
    examples: list = field(default_factory=list)
    rows: list = field(default_factory=list)  # per-energy detail records

    def to_record(self) -> dict:
        return {
            "n_instances": self.n_instances,
            "n_energies": self.n_energies,
            "n_pairs_checked": self.n_pairs_checked,
            "violations": self.violations,
            "worst_margin": self.worst_margin,
            "seed": self.seed,
        }


def combes_thomas_check(h, E: float):
    """Check |G(x,y;E)| <= (2/delta) exp(-delta |x-y|_1 / (12 dim)) pairwise.

    The distance delta from E to the spectrum must lie in (0, 1]; the bound
    is a hard inequality, checked without tolerance.
    Returns (violations, worst_margin, n_pairs).
    """
    delta = spectral.spectral_distance(h, E)
    if not 0 < delta <= 1:
        raise ValueError(f"distance to spectrum {delta:.4g} outside (0, 1]")
    G = spectral.green_matrix(h, E)
    D1 = l1_distance_matrix(h.cube)
    bound = (2.0 / delta) * np.exp(-delta * D1 / (12.0 * h.cube.dim))
    margin = bound - np.abs(G)
    return int(np.count_nonzero(margin < 0)), float(margin.min()), margin.size


def verify_combes_thomas(
    n_instances: int = 200,
    seed: int = 0,
    d: int = 1,
    L_range: tuple = (2, 8),
    amplitude_max: float = 2.0,
    energies_per_instance: int = 5,
    r0: int = 1,
    interaction_max: float = 1.0,
) -> CtReport:
    """Exercise the decay bound on random two-particle instances.

    Energies are placed at a random distance delta in (0, 1) below or above
    the spectrum, which realizes dist(E, spectrum) = delta exactly.  Any
    violating pair is recorded; the expected count is zero.
    """
    rng = np.random.default_rng(np.random.SeedSequence(entropy=seed, spawn_key=(77,)))
    violations = 0
    worst = math.inf
    pairs = 0
    examples = []
    rows = []
    n_energies = 0
    for inst in range(n_instances):
        L = int(rng.integers(L_range[0], L_range[1] + 1))
        amp = float(rng.uniform(0.0, amplitude_max))
        gap = int(rng.integers(0, 2 * L + 3))
        center = (0,) * d + (gap,) + (0,) * (d - 1)
        cube = Cube(center, L, d)
        strength = float(rng.uniform(0.0, interaction_max))
        interaction = InteractionSpec.uniform_range(r0, strength)
        dist = DistributionSpec.uniform(0.0, 1.0, amplitude=amp)
        sample = sample_potential(
            sorted(projection_union_sites(cube)), dist, seed=seed, index=inst
        )
        h = assemble(cube, sample, interaction)
        w = spectral.eigenvalues(h)
        for _ in range(energies_per_instance):
            delta = float(rng.uniform(0.001, 0.999))
            E = w[0] - delta if rng.random() < 0.5 else w[-1] + delta
            bad, margin, n = combes_thomas_check(h, float(E))
            violations += bad
            worst = min(worst, margin)
            pairs += n
            n_energies += 1
            rows.append(
                {
                    "instance": inst,
                    "L": L,
                    "amplitude": amp,
                    "E": float(E),
                    "delta": delta,
                    "n_pairs": n,
                    "violations": bad,
                    "worst_margin": margin,
                }
            )
            if bad:
                examples.append(
                    {"instance": inst, "L": L, "E": float(E), "violations": bad}
                )
    return CtReport(
        n_instances=n_instances,
        n_energies=n_energies,
        n_pairs_checked=pairs,
        violations=violations,
        worst_margin=worst,
        seed=seed,
        examples=examples,
        rows=rows,
    )
