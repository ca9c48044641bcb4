"""Integer-lattice geometry: cubes, norms, boundaries, symmetrized distance.

A configuration of two particles in Z^d is a point of Z^{2d}; one-particle
geometry is the special case of a point in Z^d.  Distances are max-norm
unless a name says otherwise.  All objects here are immutable and every
function is pure, so the module is safe for concurrent use.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache
from typing import Optional

# A lattice site: one integer per coordinate.
Point = tuple


def max_norm(x: Point) -> int:
    return max(abs(c) for c in x)


def l1_norm(x: Point) -> int:
    return sum(abs(c) for c in x)


def point_sub(x: Point, y: Point) -> Point:
    return tuple(a - b for a, b in zip(x, y))


def swap_particles(x: Point) -> Point:
    """Exchange the two d-blocks of a two-particle configuration."""
    n = len(x)
    if n % 2 != 0:
        raise ValueError(f"two-particle point must have even length, got {n}")
    d = n // 2
    return x[d:] + x[:d]


def sym_distance(x: Point, y: Point) -> int:
    """Max-norm distance in Z^{2d} modulo particle exchange."""
    if len(x) != len(y):
        raise ValueError(f"dimension mismatch: {len(x)} vs {len(y)}")
    return min(max_norm(point_sub(x, y)), max_norm(point_sub(swap_particles(x), y)))


def are_ell_distant(a: Point, b: Point, ell: int) -> bool:
    """True when the symmetrized distance exceeds 8*ell (strict)."""
    return sym_distance(a, b) > 8 * ell


@dataclass(frozen=True)
class Cube:
    """Axis-aligned max-norm ball of lattice sites.

    ``center`` lives in Z^d (one particle) or Z^{2d} (two particles);
    ``d`` is the single-particle dimension either way.  Site enumeration
    is lexicographic and stable; matrix assembly relies on that order.
    """

    center: Point
    radius: int
    d: int

    def __post_init__(self):
        if self.radius < 0:
            raise ValueError("cube radius must be nonnegative")
        if self.d < 1:
            raise ValueError("single-particle dimension must be positive")
        if len(self.center) not in (self.d, 2 * self.d):
            raise ValueError(
                f"center has {len(self.center)} coordinates; expected "
                f"{self.d} (one particle) or {2 * self.d} (two particles)"
            )
        object.__setattr__(self, "center", tuple(int(c) for c in self.center))

    @property
    def dim(self) -> int:
        return len(self.center)

    @property
    def particles(self) -> int:
        return self.dim // self.d

    @property
    def is_two_particle(self) -> bool:
        return self.particles == 2

    @property
    def n_sites(self) -> int:
        return (2 * self.radius + 1) ** self.dim

    def sites(self) -> tuple[Point, ...]:
        return _cube_sites(self)

    def site_index(self) -> dict:
        return _cube_index(self)

    def contains_point(self, x: Point) -> bool:
        return max_norm(point_sub(x, self.center)) <= self.radius

    def contains_cube(self, other: "Cube") -> bool:
        if other.dim != self.dim:
            return False
        gap = self.radius - other.radius
        return gap >= 0 and max_norm(point_sub(other.center, self.center)) <= gap

    def inner_boundary(self) -> frozenset:
        return _boundaries(self)[1]

    def outer_boundary(self) -> frozenset:
        return _boundaries(self)[0]

    def projections(self) -> tuple["Cube", "Cube"]:
        """The two one-particle factor cubes of a two-particle cube."""
        if not self.is_two_particle:
            raise ValueError("projections are defined for two-particle cubes")
        u1, u2 = self.center[: self.d], self.center[self.d :]
        return (Cube(u1, self.radius, self.d), Cube(u2, self.radius, self.d))


@lru_cache(maxsize=512)
def _cube_sites(c: Cube) -> tuple[Point, ...]:
    ranges = [range(ci - c.radius, ci + c.radius + 1) for ci in c.center]
    return tuple(itertools.product(*ranges))


@lru_cache(maxsize=512)
def _cube_index(c: Cube) -> dict:
    return {s: i for i, s in enumerate(_cube_sites(c))}


@lru_cache(maxsize=512)
def _boundaries(c: Cube) -> tuple[frozenset, frozenset]:
    inside = set(_cube_sites(c))
    outer = set()
    for s in inside:
        for axis in range(c.dim):
            for step in (-1, 1):
                t = s[:axis] + (s[axis] + step,) + s[axis + 1 :]
                if t not in inside:
                    outer.add(t)
    inner = frozenset(
        s for s in inside if max_norm(point_sub(s, c.center)) == c.radius
    )
    return frozenset(outer), inner


def cube_sites(c: Cube) -> tuple[Point, ...]:
    """All sites of the cube in lexicographic order."""
    return _cube_sites(c)


def site_index(c: Cube) -> dict:
    """Bijection site -> position in the lexicographic enumeration."""
    return _cube_index(c)


def boundaries(c: Cube) -> tuple[frozenset, frozenset]:
    """(outer, inner) boundary site sets.

    The outer boundary holds the sites outside the cube with an l1-neighbor
    inside it, i.e. exactly the sites coupled to the cube by the
    nearest-neighbor Laplacian.  The inner boundary holds the cube sites at
    max-norm distance exactly ``radius`` from the center; Green-function
    decay is measured from the center to this shell.
    """
    return _boundaries(c)


def is_interactive(c: Cube, r0: int) -> bool:
    """True when the cube meets the widened diagonal |x1 - x2| <= r0.

    Equivalent, via interval arithmetic on the two factor boxes, to
    |u1 - u2| <= 2L + r0 for the center (u1, u2).
    """
    if not c.is_two_particle:
        raise ValueError("interactivity is defined for two-particle cubes")
    u1, u2 = c.center[: c.d], c.center[c.d :]
    return max_norm(point_sub(u1, u2)) <= 2 * c.radius + r0


def projection_union_sites(c: Cube) -> frozenset:
    """Sites of Z^d covered by either factor cube of a two-particle cube."""
    p1, p2 = c.projections()
    return frozenset(p1.sites()) | frozenset(p2.sites())


def _box_distance(a: Point, b: Point, la: int, lb: int) -> int:
    # max-norm distance between the boxes C_la(a) and C_lb(b) in Z^d
    return max(0, max(abs(ai - bi) for ai, bi in zip(a, b)) - (la + lb))


def projections_disjoint(c1: Cube, c2: Cube) -> bool:
    """Whether the projection unions of two equal-size cubes are disjoint."""
    if not (c1.is_two_particle and c2.is_two_particle) or c1.d != c2.d:
        raise ValueError("expected two two-particle cubes over the same Z^d")
    if c1.radius != c2.radius:
        raise ValueError("projection disjointness is defined at equal radius")
    d, L = c1.d, c1.radius
    us = (c1.center[:d], c1.center[d:])
    vs = (c2.center[:d], c2.center[d:])
    return all(_box_distance(u, v, L, L) > 0 for u in us for v in vs)


def cubes_ell_distant(c1: Cube, c2: Cube, ell: int, mode: str = "center") -> bool:
    """ell-distance test for two-particle cubes.

    ``center`` compares the symmetrized distance of the centers (default,
    the conservative criterion); ``set`` compares the symmetrized distance
    of the full site sets, computed in closed form from the factor boxes.
    """
    if mode == "center":
        return are_ell_distant(c1.center, c2.center, ell)
    if mode != "set":
        raise ValueError(f"unknown distance mode {mode!r}")
    d = c1.d
    u1, u2 = c1.center[:d], c1.center[d:]
    v1, v2 = c2.center[:d], c2.center[d:]
    direct = max(
        _box_distance(u1, v1, c1.radius, c2.radius),
        _box_distance(u2, v2, c1.radius, c2.radius),
    )
    swapped = max(
        _box_distance(u2, v1, c1.radius, c2.radius),
        _box_distance(u1, v2, c1.radius, c2.radius),
    )
    return min(direct, swapped) > 8 * ell


@dataclass(frozen=True)
class InteractionSpec:
    """Short-range two-body interaction.

    ``profile[k]`` is the value at pair distance |x1 - x2| = k for
    k = 0..r0; the value is zero beyond r0.  ``pairs`` optionally overrides
    individual ordered difference vectors (x1 - x2), which permits an
    asymmetric interaction.
    """

    r0: int
    profile: tuple = (0.0,)
    pairs: Optional[tuple] = None  # ((diff vector, value), ...)
    bound: Optional[float] = None

    def __post_init__(self):
        if self.r0 < 0:
            raise ValueError("interaction range r0 must be nonnegative")
        profile = tuple(float(v) for v in self.profile)
        if len(profile) != self.r0 + 1:
            raise ValueError(
                f"profile must have r0+1={self.r0 + 1} entries, got {len(profile)}"
            )
        if any(v < 0 for v in profile):
            raise ValueError("interaction values must be nonnegative")
        object.__setattr__(self, "profile", profile)
        if self.pairs is not None:
            pairs = tuple((tuple(diff), float(v)) for diff, v in self.pairs)
            for diff, v in pairs:
                if v < 0:
                    raise ValueError("interaction values must be nonnegative")
                if max_norm(diff) > self.r0:
                    raise ValueError("pair override outside the declared range r0")
            object.__setattr__(self, "pairs", pairs)
        top = max(profile, default=0.0)
        if self.pairs:
            top = max(top, max(v for _, v in self.pairs))
        if self.bound is None:
            object.__setattr__(self, "bound", top)
        elif top > self.bound:
            raise ValueError("interaction values exceed the declared bound")

    @classmethod
    def zero(cls) -> "InteractionSpec":
        return cls(r0=0, profile=(0.0,))

    @classmethod
    def uniform_range(cls, r0: int, value: float) -> "InteractionSpec":
        return cls(r0=r0, profile=(float(value),) * (r0 + 1))

    def value(self, x1: Point, x2: Point) -> float:
        diff = point_sub(x1, x2)
        if max_norm(diff) > self.r0:
            return 0.0
        if self.pairs is not None:
            for d, v in self.pairs:
                if d == diff:
                    return v
        return self.profile[max_norm(diff)]
