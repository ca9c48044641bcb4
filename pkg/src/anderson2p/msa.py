"""Scale schedules and the cube-classification taxonomy.

The multi-scale analysis grades finite cubes by how well the energy E can
be resolved on them:

* resonant (R): E lies within exp(-L**beta) of the cube spectrum;
* completely non-resonant (CNR): no sub-cube of size >= L**(1/alpha) is
  resonant, the cube itself included;
* singular (S): the Green function from the center to the inner boundary
  fails the exp(-m*L) decay bound at mass m;
* tunnelling (T): some energy in the interval makes two disjoint
  previous-scale sub-cubes singular at once;
* interactive (I): the cube meets the widened diagonal where the two-body
  interaction can act.

Classifiers are pure per (cube, sample, energy).  A ``CubeClassifier``
instance additionally caches sub-cube spectra and the cube eigensystem so
that scans over many energies stay cheap; estimator loops rely on this.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional, Sequence

import numpy as np

from . import spectral
from .disorder import DisorderSample
from .hamiltonian import HamiltonianMatrix, assemble
from .lattice import Cube, InteractionSpec, cubes_ell_distant, is_interactive

DEFAULT_CNR_BUDGET = 100_000


class ScheduleInvalidError(ValueError):
    """A mass-sequence factor dropped to zero or below."""


class ScaleTooSmallError(ValueError):
    """The mass-update bound is nonpositive; the initial scale must grow."""


@dataclass(frozen=True)
class MsaParameters:
    """Exponents and switches of the scale analysis.

    Defaults are the smallest simple values compatible with the standing
    constraints p > 12d, q > 4p and p_tilde > (9/4)p + (15/2)d at d = 1.
    """

    d: int = 1
    alpha: float = 1.5
    beta: float = 0.5
    p: float = 13.0
    q: float = 53.0
    p_tilde: float = 37.0
    gamma: float = 0.5
    J: int = 3
    grid_points: int = 64
    cnr_budget: int = DEFAULT_CNR_BUDGET
    distant_mode: str = "center"

    def __post_init__(self):
        if not 1 < self.alpha < 2:
            raise ValueError("alpha must lie in (1, 2)")
        if not 0 < self.beta < 1:
            raise ValueError("beta must lie in (0, 1)")
        if not self.p > 12 * self.d:
            raise ValueError(f"p must exceed 12*d = {12 * self.d}")
        if not self.q > 4 * self.p:
            raise ValueError(f"q must exceed 4*p = {4 * self.p}")
        if not self.p_tilde > 2.25 * self.p + 7.5 * self.d:
            raise ValueError(
                f"p_tilde must exceed (9/4)p + (15/2)d = {2.25 * self.p + 7.5 * self.d}"
            )
        if self.gamma <= 0:
            raise ValueError("gamma must be positive")
        if self.J < 1 or self.J % 2 == 0:
            raise ValueError("J must be an odd positive integer")
        if self.grid_points < 1:
            raise ValueError("grid_points must be positive")
        if self.distant_mode not in ("center", "set"):
            raise ValueError("distant_mode must be 'center' or 'set'")


@dataclass(frozen=True)
class EnergyInterval:
    e_low: float
    e_high: float
    grid_points: int = 64

    def __post_init__(self):
        if self.e_low > self.e_high:
            raise ValueError("energy interval requires e_low <= e_high")
        if self.grid_points < 1:
            raise ValueError("grid_points must be positive")

    def intersect(self, lo: float, hi: float) -> Optional["EnergyInterval"]:
        a, b = max(self.e_low, lo), min(self.e_high, hi)
        if a > b:
            return None
        return EnergyInterval(a, b, self.grid_points)


@dataclass(frozen=True)
class MsaSchedule:
    lengths: tuple
    masses: tuple
    m0: float
    gamma: float
    product_floor_ok: bool

    @classmethod
    def build(
        cls, L0: int, m0: float, gamma: float, K: int, alpha: float = 1.5
    ) -> "MsaSchedule":
        lengths = length_schedule(L0, alpha, K)
        masses, floor_ok = mass_schedule(m0, gamma, lengths, alpha)
        return cls(tuple(lengths), tuple(masses), m0, gamma, floor_ok)


def _floor_power(L: int, alpha: float) -> int:
    if alpha == 1.5:
        return math.isqrt(L**3)
    return int(math.floor(L**alpha))


def length_schedule(L0: int, alpha: float, K: int) -> list:
    """Lengths L_0..L_K with L_{k+1} = floor(L_k**alpha)."""
    if L0 <= 2:
        raise ValueError("initial length must satisfy L0 > 2")
    if not 1 < alpha < 2:
        raise ValueError("alpha must lie in (1, 2)")
    if K < 0:
        raise ValueError("K must be nonnegative")
    out = [int(L0)]
    for _ in range(K):
        nxt = _floor_power(out[-1], alpha)
        if nxt > 2**62:
            raise OverflowError("length scale exceeds the supported range")
        out.append(nxt)
    return out


def mass_schedule(
    m0: float, gamma: float, lengths: Sequence[int], alpha: float = 1.5
) -> tuple:
    """Masses m_k = m0 * prod_{j=1..k} (1 - gamma * L_j**-1/2), plus floor flag.

    The flag reports whether the infinite product stays >= 1/2; the product
    tail beyond the computed lengths is bounded by extending the length
    recurrence until the terms are negligible and then summing the remainder
    geometrically.
    """
    if m0 <= 0:
        raise ValueError("m0 must be positive")
    if gamma < 0:
        raise ValueError("gamma must be nonnegative")
    lengths = [int(L) for L in lengths]
    masses = [float(m0)]
    prod = 1.0
    for L in lengths[1:]:
        factor = 1.0 - gamma * L**-0.5
        if factor <= 0:
            raise ScheduleInvalidError(
                f"mass factor 1 - gamma/sqrt({L}) = {factor:.6g} is nonpositive"
            )
        prod *= factor
        masses.append(m0 * prod)
    if gamma == 0:
        return masses, True

    # Extend the recurrence for the floor check only.
    ext = list(lengths) if lengths else [3]
    full_prod = prod
    while ext[-1] < 10**12:
        nxt = _floor_power(ext[-1], alpha)
        if nxt <= ext[-1]:
            nxt = ext[-1] + 1
        ext.append(nxt)
        factor = 1.0 - gamma * nxt**-0.5
        if factor <= 0:
            return masses, False
        full_prod *= factor
    t_last = ext[-1] ** -0.5
    ratio = t_last / ext[-2] ** -0.5
    tail = gamma * t_last * ratio / (1.0 - ratio)
    floor_ok = full_prod * max(0.0, 1.0 - tail) >= 0.5
    return masses, floor_ok


@dataclass(frozen=True)
class NdronsMass:
    mass: float
    correction_small: bool  # correction <= m'/2, as needed at large scales


def ndrons_mass(m_prime: float, L: int, d: int) -> NdronsMass:
    """Mass surviving the non-interactive reduction: m' - ln((2L+1)**d)/L."""
    if m_prime <= 0:
        raise ValueError("m' must be positive")
    correction = d * math.log(2 * L + 1) / L
    return NdronsMass(mass=m_prime - correction, correction_small=correction <= m_prime / 2)


def next_mass_lower_bound(m_k: float, J: int, L_k: int) -> float:
    """Lower bound m_k * (1 - (5J+6)/sqrt(2*L_k)) for the next-scale mass."""
    if m_k <= 0:
        raise ValueError("m_k must be positive")
    if J < 1 or J % 2 == 0:
        raise ValueError("J must be an odd positive integer")
    factor = 1.0 - (5 * J + 6) / math.sqrt(2 * L_k)
    if factor <= 0:
        raise ScaleTooSmallError(
            f"mass bound factor {factor:.4g} at L_k={L_k}; increase the initial scale"
        )
    return m_k * factor


def resonance_width(L: int, beta: float) -> float:
    return math.exp(-(L**beta))


def scan_lmin(L: int, alpha: float) -> int:
    """Smallest sub-cube size scanned by the CNR test: ceil(L**(1/alpha))."""
    if alpha == 1.5:
        l = 1
        while l**3 < L**2:
            l += 1
        return l
    return int(math.ceil(L ** (1.0 / alpha) - 1e-12))


@lru_cache(maxsize=256)
def _cnr_plan(cube: Cube, alpha: float, budget: int):
    """Sub-cubes scanned by the CNR test, with the enumeration mode.

    Containment is enforced: a scanned sub-cube never protrudes from the
    host cube, so its restricted operator is well defined.  Above the
    evaluation budget the scan falls back to dyadic sizes with a center
    stride of half the size.
    """
    L = cube.radius
    lmin = scan_lmin(L, alpha)
    full = sum((2 * (L - l) + 1) ** cube.dim for l in range(lmin, L + 1))
    if full <= budget:
        mode = "exhaustive"
        sizes = range(lmin, L + 1)
        stride = {l: 1 for l in sizes}
    else:
        mode = "subsampled"
        sizes = set()
        l = L
        while l >= lmin:
            sizes.add(l)
            l //= 2
        sizes.add(lmin)
        sizes = sorted(sizes)
        stride = {l: max(1, l // 2) for l in sizes}
    subs = []
    for l in sizes:
        r = L - l
        axes = []
        for c in cube.center:
            vals = list(range(c - r, c + r + 1, stride[l]))
            if vals[-1] != c + r:
                vals.append(c + r)
            axes.append(vals)
        import itertools

        for y in itertools.product(*axes):
            subs.append(Cube(y, l, cube.d))
    return tuple(subs), mode


def _merge_open_intervals(intervals):
    if not intervals:
        return []
    intervals = sorted(intervals)
    out = [list(intervals[0])]
    for lo, hi in intervals[1:]:
        if lo < out[-1][1]:
            out[-1][1] = max(out[-1][1], hi)
        else:
            out.append([lo, hi])
    return [tuple(iv) for iv in out]


def open_interval_unions_overlap(a, b) -> bool:
    i = j = 0
    while i < len(a) and j < len(b):
        lo = max(a[i][0], b[j][0])
        hi = min(a[i][1], b[j][1])
        if lo < hi:
            return True
        if a[i][1] <= b[j][1]:
            i += 1
        else:
            j += 1
    return False


class CubeClassifier:
    """Classification engine for one (cube, sample, interaction) triple.

    Caches the cube eigensystem and every scanned sub-cube spectrum, so
    repeated queries across energies cost one decomposition each.
    """

    def __init__(
        self,
        cube: Cube,
        sample: DisorderSample,
        interaction: InteractionSpec,
        params: MsaParameters,
    ):
        self.cube = cube
        self.sample = sample
        self.interaction = interaction
        self.params = params
        self._ham: Optional[HamiltonianMatrix] = None
        self._sub_spectra: dict = {}
        self._resonance_set = None

    # -- assembly ---------------------------------------------------------

    def ham(self) -> HamiltonianMatrix:
        if self._ham is None:
            self._ham = assemble(self.cube, self.sample, self.interaction)
        return self._ham

    def _spectrum_of(self, cube: Cube) -> np.ndarray:
        key = (cube.center, cube.radius)
        if key not in self._sub_spectra:
            h = assemble(cube, self.sample, self.interaction)
            self._sub_spectra[key] = spectral.eigenvalues(h)
        return self._sub_spectra[key]

    # -- resonance --------------------------------------------------------

    def spectral_distance(self, E: float) -> float:
        return spectral.spectral_distance(self.ham(), E)

    def is_resonant(self, E: float) -> bool:
        if self.cube.radius < 2:
            raise ValueError("resonance classification requires radius >= 2")
        return self.spectral_distance(E) < resonance_width(
            self.cube.radius, self.params.beta
        )

    def cnr_scan(self):
        return _cnr_plan(self.cube, self.params.alpha, self.params.cnr_budget)

    @property
    def cnr_mode(self) -> str:
        return self.cnr_scan()[1]

    def is_cnr(self, E: float) -> bool:
        if self.cube.radius < 2:
            raise ValueError("CNR classification requires radius >= 2")
        subs, _ = self.cnr_scan()
        for sub in subs:
            width = resonance_width(sub.radius, self.params.beta)
            eigs = self._spectrum_of(sub)
            if np.min(np.abs(eigs - E)) < width:
                return False
        return True

    def resonance_set(self):
        """Energies at which some scanned sub-cube is resonant.

        Returned as a merged list of open intervals; the cube is E-CNR
        exactly when E avoids all of them.  This makes the existential
        quantifier over the whole energy axis exact.
        """
        if self._resonance_set is None:
            ivs = []
            subs, _ = self.cnr_scan()
            for sub in subs:
                width = resonance_width(sub.radius, self.params.beta)
                for lam in self._spectrum_of(sub):
                    ivs.append((lam - width, lam + width))
            self._resonance_set = _merge_open_intervals(ivs)
        return self._resonance_set

    # -- singularity ------------------------------------------------------

    def _boundary_targets(self):
        index = self.cube.site_index()
        inner = sorted(self.cube.inner_boundary())
        return np.array([index[s] for s in inner], dtype=np.intp)

    def boundary_green_max(self, energies) -> tuple:
        """(max |G(center, inner boundary; E)|, resonant flag) per energy."""
        h = self.ham()
        src = self.cube.site_index()[self.cube.center]
        vals, resonant = spectral.resolvent_rows(
            h, energies, src, self._boundary_targets()
        )
        gmax = np.max(np.abs(vals), axis=1)
        gmax[resonant] = np.inf
        return gmax, resonant

    def singular_flags(self, energies, m: float) -> np.ndarray:
        """(E, m)-singularity per energy; solver resonances count singular."""
        if self.cube.radius < 1:
            raise ValueError("singularity classification requires radius >= 1")
        gmax, resonant = self.boundary_green_max(np.asarray(energies, dtype=float))
        threshold = math.exp(-m * self.cube.radius)
        return (gmax > threshold) | resonant

    def is_singular(self, E: float, m: float) -> bool:
        return bool(self.singular_flags(np.array([E]), m)[0])

    def green_max(self, E: float) -> float:
        gmax, _ = self.boundary_green_max(np.array([float(E)]))
        return float(gmax[0])


# -- module-level operation wrappers --------------------------------------


def is_resonant(h: HamiltonianMatrix, E: float, beta: float) -> bool:
    """Resonance test on an assembled Hamiltonian (radius >= 2)."""
    if h.cube.radius < 2:
        raise ValueError("resonance classification requires radius >= 2")
    return spectral.spectral_distance(h, E) < resonance_width(h.cube.radius, beta)


def is_cnr(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec,
    E: float,
    params: MsaParameters,
) -> bool:
    return CubeClassifier(cube, sample, interaction, params).is_cnr(E)


def is_singular(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec,
    E: float,
    m: float,
    params: Optional[MsaParameters] = None,
) -> bool:
    params = params or MsaParameters(d=cube.d)
    return CubeClassifier(cube, sample, interaction, params).is_singular(E, m)


def energy_grid(
    interval: EnergyInterval,
    spectra,
    beta: float,
    grid_points: Optional[int] = None,
) -> np.ndarray:
    """Finite probe set for an existential quantifier over the interval.

    A uniform grid over the interval is augmented with every eigenvalue of
    the supplied (eigenvalues, radius) pairs that falls inside it, shifted
    by half the resonance width of its cube to either side (singularity is
    extremal near spectrum), clipped back into the interval.  This
    under-approximates the continuous event; the grid density is the
    ``grid_points`` knob.
    """
    n = grid_points if grid_points is not None else interval.grid_points
    lo, hi = interval.e_low, interval.e_high
    if hi == lo or n == 1:
        pts = [lo]
    else:
        pts = list(np.linspace(lo, hi, n))
    for eigs, radius in spectra:
        shift = 0.5 * resonance_width(radius, beta)
        eigs = np.asarray(eigs)
        inside = eigs[(eigs >= lo) & (eigs <= hi)]
        for lam in inside:
            pts.append(min(hi, max(lo, lam - shift)))
            pts.append(min(hi, max(lo, lam + shift)))
    return np.unique(np.array(pts, dtype=float))


def is_tunnelling(
    cube: Cube,
    sample: DisorderSample,
    interval: Optional[EnergyInterval],
    m: float,
    prev_length: int,
    params: Optional[MsaParameters] = None,
) -> bool:
    """Whether two disjoint previous-scale sub-cubes go singular together.

    ``cube`` is one-particle; the singularity of the candidate sub-cubes is
    judged against the one-particle restriction sharing the same disorder
    sample.  An empty interval never tunnels.
    """
    if cube.is_two_particle:
        raise ValueError("tunnelling scan expects a one-particle cube")
    if not 1 <= prev_length < cube.radius:
        raise ValueError("previous scale must satisfy 1 <= prev < radius")
    if interval is None:
        return False
    params = params or MsaParameters(d=cube.d)
    r = cube.radius - prev_length
    centers = list(
        itertools.product(*[range(c - r, c + r + 1) for c in cube.center])
    )
    classifiers = [
        CubeClassifier(
            Cube(y, prev_length, cube.d), sample, InteractionSpec.zero(), params
        )
        for y in centers
    ]
    grid = energy_grid(
        interval,
        [(cl._spectrum_of(cl.cube), prev_length) for cl in classifiers],
        params.beta,
        interval.grid_points,
    )
    flags = np.array([cl.singular_flags(grid, m) for cl in classifiers])
    coords = np.array(centers)
    for e_idx in range(len(grid)):
        sel = coords[flags[:, e_idx]]
        if len(sel) >= 2:
            span = sel.max(axis=0) - sel.min(axis=0)
            if span.max() > 2 * prev_length:
                return True
    return False


def two_particle_tunnelling(
    cube: Cube,
    sample: DisorderSample,
    interval: Optional[EnergyInterval],
    m: float,
    prev_length: int,
    params: Optional[MsaParameters] = None,
) -> bool:
    """Non-interactive two-particle cube tunnels iff either factor does."""
    p1, p2 = cube.projections()
    return is_tunnelling(p1, sample, interval, m, prev_length, params) or is_tunnelling(
        p2, sample, interval, m, prev_length, params
    )


def count_singular_subcubes(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec,
    E: float,
    m_k: float,
    L_k: int,
    kind: str,
    params: Optional[MsaParameters] = None,
    extra_centers: Sequence = (),
) -> int:
    """Maximal pairwise-distant family of singular sub-cubes of one kind.

    Candidate centers sit on a stride-L_k grid inside the host cube (plus
    any caller-supplied seeds); the maximum is exact over that candidate
    set and capped at J + 1, which is all the counting bounds ever need.
    """
    params = params or MsaParameters(d=cube.d)
    if not 1 <= L_k < cube.radius:
        raise ValueError("sub-scale must satisfy 1 <= L_k < radius")
    if kind not in ("NI", "I"):
        raise ValueError("kind must be 'NI' or 'I'")
    r = cube.radius - L_k
    axes = []
    for c in cube.center:
        vals = list(range(c - r, c + r + 1, L_k))
        if vals[-1] != c + r:
            vals.append(c + r)
        axes.append(vals)
    centers = set(itertools.product(*axes))
    for y in extra_centers:
        sub = Cube(tuple(y), L_k, cube.d)
        if not cube.contains_cube(sub):
            raise ValueError(f"extra center {y} does not fit inside the cube")
        centers.add(tuple(y))

    singular = []
    r0 = interaction.r0
    for y in sorted(centers):
        sub = Cube(y, L_k, cube.d)
        if (kind == "I") != is_interactive(sub, r0):
            continue
        cl = CubeClassifier(sub, sample, interaction, params)
        if cl.is_singular(E, m_k):
            singular.append(sub)

    cap = params.J + 1
    best = 0

    def extend(chosen, rest):
        nonlocal best
        best = max(best, len(chosen))
        if best >= cap:
            return
        for i, cand in enumerate(rest):
            if len(chosen) + len(rest) - i <= best:
                break
            if all(
                cubes_ell_distant(cand, c, L_k, params.distant_mode) for c in chosen
            ):
                extend(chosen + [cand], rest[i + 1 :])

    extend([], singular)
    return min(best, cap)


# -- classification records ------------------------------------------------


@dataclass
class CubeClassification:
    cube: Cube
    energy: float
    resonant: Optional[bool]
    cnr: Optional[bool]
    singular: bool
    tunnelling: Optional[bool]
    interactive: Optional[bool]
    green_max: float
    spectral_distance: float
    mode: str

    def to_record(self) -> dict:
        return {
            "cube": {
                "center": list(self.cube.center),
                "radius": self.cube.radius,
                "d": self.cube.d,
            },
            "E": self.energy,
            "flags": {
                "R": self.resonant,
                "CNR": self.cnr,
                "S": self.singular,
                "T": self.tunnelling,
                "interactive": self.interactive,
            },
            "green_max": self.green_max if math.isfinite(self.green_max) else None,
            "spectral_distance": self.spectral_distance,
            "mode": self.mode,
        }


def classify(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec,
    E: float,
    m: float,
    params: MsaParameters,
    interval: Optional[EnergyInterval] = None,
    prev_length: Optional[int] = None,
) -> CubeClassification:
    """Full flag record for one (cube, sample, energy) instance."""
    cl = CubeClassifier(cube, sample, interaction, params)
    big_enough = cube.radius >= 2
    tun = None
    if prev_length and interval is not None and 1 <= prev_length < cube.radius:
        if cube.is_two_particle:
            if not is_interactive(cube, interaction.r0):
                tun = two_particle_tunnelling(
                    cube, sample, interval, m, prev_length, params
                )
        else:
            tun = is_tunnelling(cube, sample, interval, m, prev_length, params)
    return CubeClassification(
        cube=cube,
        energy=E,
        resonant=cl.is_resonant(E) if big_enough else None,
        cnr=cl.is_cnr(E) if big_enough else None,
        singular=cl.is_singular(E, m),
        tunnelling=tun,
        interactive=is_interactive(cube, interaction.r0)
        if cube.is_two_particle
        else None,
        green_max=cl.green_max(E),
        spectral_distance=cl.spectral_distance(E),
        mode=cl.cnr_mode,
    )
