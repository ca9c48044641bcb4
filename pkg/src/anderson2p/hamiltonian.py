"""Finite-volume Hamiltonian assembly.

The lattice Laplacian convention is -Delta = 2*dim*I - A, so the kinetic
part is positive semidefinite and the spectrum of -Delta alone lies in
[0, 4*dim].  Restriction to a cube is plain truncation: couplings leaving
the cube are dropped while the diagonal keeps the constant 2*dim, which is
the hard-wall (Dirichlet) convention.  The alternative pure-adjacency
convention (no diagonal constant, spectrum shifted by -2*dim) is available
through ``laplacian_diagonal=False`` but is not used by the scale analysis.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .disorder import DisorderSample
from .lattice import Cube, InteractionSpec


@dataclass
class HamiltonianMatrix:
    """Sparse symmetric finite-volume operator over a cube's index map."""

    cube: Cube
    matrix: sp.csr_matrix
    diag_constant: float
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    def dense(self) -> np.ndarray:
        return self.matrix.toarray()

    def scale(self) -> float:
        """Infinity norm of the operator, cached; used for pivot thresholds."""
        if "scale" not in self._cache:
            self._cache["scale"] = float(
                np.max(np.abs(self.matrix).sum(axis=1))
            )
        return self._cache["scale"]


@lru_cache(maxsize=256)
def _geometry(cube: Cube):
    """Sample-independent assembly data for a cube.

    Returns (indptr, indices, offdiag mask, diag positions, projection index
    arrays into the sorted one-particle site list, that site list).
    """
    sites = cube.sites()
    index = cube.site_index()
    n = len(sites)
    d = cube.d

    if cube.is_two_particle:
        one_p = sorted({s[:d] for s in sites} | {s[d:] for s in sites})
    else:
        one_p = list(sites)
    one_index = {s: i for i, s in enumerate(one_p)}

    indptr = [0]
    indices = []
    diag_pos = []
    for i, s in enumerate(sites):
        row = [i]
        for axis in range(cube.dim):
            for step in (-1, 1):
                t = s[:axis] + (s[axis] + step,) + s[axis + 1 :]
                j = index.get(t)
                if j is not None:
                    row.append(j)
        row.sort()
        diag_pos.append(len(indices) + row.index(i))
        indices.extend(row)
        indptr.append(len(indices))

    if cube.is_two_particle:
        i1 = np.array([one_index[s[:d]] for s in sites], dtype=np.intp)
        i2 = np.array([one_index[s[d:]] for s in sites], dtype=np.intp)
    else:
        i1 = np.arange(n, dtype=np.intp)
        i2 = None

    return (
        np.array(indptr, dtype=np.int32),
        np.array(indices, dtype=np.int32),
        np.array(diag_pos, dtype=np.intp),
        i1,
        i2,
        tuple(one_p),
    )


@lru_cache(maxsize=256)
def _interaction_diag(cube: Cube, interaction: InteractionSpec) -> np.ndarray:
    d = cube.d
    return np.array(
        [interaction.value(s[:d], s[d:]) for s in cube.sites()], dtype=float
    )


def _assemble(cube: Cube, diag: np.ndarray) -> HamiltonianMatrix:
    indptr, indices, diag_pos, _, _, _ = _geometry(cube)
    data = np.full(len(indices), -1.0)
    data[diag_pos] = diag
    m = sp.csr_matrix((data, indices, indptr), shape=(len(diag), len(diag)))
    return HamiltonianMatrix(cube=cube, matrix=m, diag_constant=2.0 * cube.dim)


def potential_vector(cube: Cube, sample: DisorderSample) -> np.ndarray:
    """Per-site external potential in cube site order (sum over particles)."""
    _, _, _, i1, i2, one_p = _geometry(cube)
    v = np.array([sample[s] for s in one_p], dtype=float)
    out = v[i1].copy()
    if i2 is not None:
        out += v[i2]
    return out


def assemble_two_particle(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec,
    laplacian_diagonal: bool = True,
) -> HamiltonianMatrix:
    """Two-particle Hamiltonian -Delta + V(x1) + V(x2) + U on the cube."""
    if not cube.is_two_particle:
        raise ValueError("expected a two-particle cube")
    _, _, _, i1, i2, one_p = _geometry(cube)
    v = np.array([sample[s] for s in one_p], dtype=float)
    diag = np.full(cube.n_sites, 2.0 * cube.dim if laplacian_diagonal else 0.0)
    diag += v[i1]
    diag += v[i2]
    diag += _interaction_diag(cube, interaction)
    h = _assemble(cube, diag)
    h.diag_constant = 2.0 * cube.dim if laplacian_diagonal else 0.0
    return h


def assemble_single_particle(
    cube: Cube, sample: DisorderSample, laplacian_diagonal: bool = True
) -> HamiltonianMatrix:
    """One-particle Hamiltonian -Delta + V on the cube."""
    if cube.is_two_particle:
        raise ValueError("expected a one-particle cube")
    _, _, _, _, _, one_p = _geometry(cube)
    diag = np.full(cube.n_sites, 2.0 * cube.dim if laplacian_diagonal else 0.0)
    diag += np.array([sample[s] for s in one_p], dtype=float)
    h = _assemble(cube, diag)
    h.diag_constant = 2.0 * cube.dim if laplacian_diagonal else 0.0
    return h


def assemble(
    cube: Cube,
    sample: DisorderSample,
    interaction: InteractionSpec = InteractionSpec.zero(),
    laplacian_diagonal: bool = True,
) -> HamiltonianMatrix:
    if cube.is_two_particle:
        return assemble_two_particle(cube, sample, interaction, laplacian_diagonal)
    return assemble_single_particle(cube, sample, laplacian_diagonal)


def tensor_sum_spectrum(s1, s2) -> np.ndarray:
    """All pairwise sums of two spectra, sorted, multiplicity preserved."""
    a = np.asarray(s1, dtype=float)
    b = np.asarray(s2, dtype=float)
    return np.sort(np.add.outer(a, b).ravel())


@lru_cache(maxsize=64)
def l1_distance_matrix(cube: Cube) -> np.ndarray:
    """Pairwise l1 distances between cube sites, in index order."""
    coords = np.array(cube.sites(), dtype=float)
    return np.abs(coords[:, None, :] - coords[None, :, :]).sum(axis=2)


def dump_coo(h: HamiltonianMatrix, fh) -> None:
    """Write the matrix as text triplets (row, col, value) for cross-checks."""
    coo = h.matrix.tocoo()
    order = np.lexsort((coo.col, coo.row))
    for r, c, v in zip(coo.row[order], coo.col[order], coo.data[order]):
        fh.write(f"{r} {c} {float(v)!r}\n")
