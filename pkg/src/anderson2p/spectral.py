"""Eigenvalue and Green-function computations for finite-volume operators.

Green rows are obtained from a sparse LU factorization of (H - E); the
factorization detects near-singular systems (resonances) through its pivot
sizes, at the fixed threshold ``RESONANCE_RTOL`` times the operator norm.
Classifier-style scans over many energies instead reuse one symmetric
eigendecomposition per matrix (see :func:`resolvent_rows`); both routes are
cross-validated in the test suite.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .hamiltonian import HamiltonianMatrix
from .lattice import Point

DENSE_CAP = 20_000
ITERATIVE_CUTOVER = 600
RESONANCE_RTOL = 1e-14
RESIDUAL_RTOL = 1e-8


class ResonanceError(RuntimeError):
    """The energy is numerically indistinguishable from the spectrum."""


class ConvergenceError(RuntimeError):
    """Iterative extremal eigensolver failed to converge."""


@dataclass
class SpectrumResult:
    eigenvalues: np.ndarray
    eigenvectors: Optional[np.ndarray]
    method: str


@dataclass
class GreenRow:
    source: Point
    energy: float
    values: dict
    condition_estimate: float


def eigenvalues(h: HamiltonianMatrix, dense_cap: int = DENSE_CAP) -> np.ndarray:
    if "eigvals" not in h._cache:
        if h.n > dense_cap:
            raise ValueError(f"cube has {h.n} sites, above the dense cap {dense_cap}")
        h._cache["eigvals"] = np.linalg.eigvalsh(h.dense())
    return h._cache["eigvals"]


def eigensystem(h: HamiltonianMatrix, dense_cap: int = DENSE_CAP):
    if "eigvecs" not in h._cache:
        if h.n > dense_cap:
            raise ValueError(f"cube has {h.n} sites, above the dense cap {dense_cap}")
        w, v = np.linalg.eigh(h.dense())
        h._cache["eigvals"] = w
        h._cache["eigvecs"] = v
    return h._cache["eigvals"], h._cache["eigvecs"]


def full_spectrum(
    h: HamiltonianMatrix, want_vectors: bool = False, dense_cap: int = DENSE_CAP
) -> SpectrumResult:
    """All eigenvalues in ascending order, optionally with eigenvectors."""
    if want_vectors:
        w, v = eigensystem(h, dense_cap)
        return SpectrumResult(w, v, "dense")
    return SpectrumResult(eigenvalues(h, dense_cap), None, "dense")


def _fix_sign(vec: np.ndarray) -> np.ndarray:
    k = int(np.argmax(np.abs(vec)))
    return -vec if vec[k] < 0 else vec


def lowest_eigenpairs(h: HamiltonianMatrix, k: int):
    """The k lowest eigenpairs via a dense partial decomposition."""
    k = min(k, h.n)
    if "eigvecs" in h._cache:
        w, v = h._cache["eigvals"], h._cache["eigvecs"]
        return w[:k], v[:, :k]
    w, v = sla.eigh(h.dense(), subset_by_index=[0, k - 1])
    return w, v


def lowest_eigenpair(h: HamiltonianMatrix, method: Optional[str] = None):
    """Lowest eigenvalue and normalized eigenvector.

    Small systems use a dense partial decomposition; large ones the ARPACK
    shift-invert solver.  ``method`` forces ``"dense"`` or
    ``"iterative-extremal"`` explicitly.
    """
    if method is None:
        method = "dense" if h.n <= ITERATIVE_CUTOVER else "iterative-extremal"
    if method == "dense" or h.n < 3:
        w, v = lowest_eigenpairs(h, 1)
        return float(w[0]), _fix_sign(v[:, 0])
    if method != "iterative-extremal":
        raise ValueError(f"unknown method {method!r}")
    # H + shift is positive definite for our conventions (V, U >= 0), which
    # keeps the shift-invert factorization well conditioned.
    shift = max(1.0, h.scale() * 1e-3)
    try:
        w, v = spla.eigsh(h.matrix, k=1, sigma=-shift, which="LM", maxiter=5000)
    except spla.ArpackNoConvergence as exc:
        raise ConvergenceError(str(exc)) from exc
    vec = v[:, 0]
    return float(w[0]), _fix_sign(vec / np.linalg.norm(vec))


def spectral_distance(h: HamiltonianMatrix, E: float) -> float:
    """Distance from E to the spectrum of the cube Hamiltonian."""
    return float(np.min(np.abs(eigenvalues(h) - E)))


def _shifted(h: HamiltonianMatrix, E: float):
    return h.matrix - E * sp.identity(h.n, format="csr")


def _factorize(h: HamiltonianMatrix, E: float):
    try:
        lu = spla.splu(_shifted(h, E).tocsc())
    except RuntimeError as exc:  # exactly singular
        raise ResonanceError(f"E={E} is an eigenvalue of the cube Hamiltonian") from exc
    piv = np.min(np.abs(lu.U.diagonal()))
    if piv < RESONANCE_RTOL * max(h.scale(), 1.0):
        raise ResonanceError(
            f"near-singular solve at E={E}: pivot {piv:.3e} below threshold"
        )
    return lu, piv


def green_row(h: HamiltonianMatrix, E: float, source: Point) -> GreenRow:
    """Solve (H - E) g = delta_source and return the row as a site map."""
    index = h.cube.site_index()
    try:
        src = index[source]
    except KeyError:
        raise ValueError(f"source {source} not in cube") from None
    lu, piv = _factorize(h, E)
    rhs = np.zeros(h.n)
    rhs[src] = 1.0
    g = lu.solve(rhs)
    A = _shifted(h, E)
    resid = A @ g - rhs
    if np.linalg.norm(resid) > RESIDUAL_RTOL:
        g = g - lu.solve(resid)
        if np.linalg.norm(A @ g - rhs) > RESIDUAL_RTOL * max(1.0, np.linalg.norm(g)):
            raise ResonanceError(f"ill-conditioned solve at E={E}")
    sites = h.cube.sites()
    cond = max(h.scale(), 1.0) / piv
    return GreenRow(
        source=source,
        energy=E,
        values={s: float(gv) for s, gv in zip(sites, g)},
        condition_estimate=float(cond),
    )


def green_matrix(h: HamiltonianMatrix, E: float) -> np.ndarray:
    """Full Green matrix (H - E)^-1, one factorization for all sources."""
    lu, _ = _factorize(h, E)
    return lu.solve(np.eye(h.n))


def resolvent_rows(
    h: HamiltonianMatrix,
    energies,
    source_idx: int,
    target_idx,
):
    """Green values G(source, target; E) for a batch of energies.

    Returns (values, resonant) where values has shape (n_energies,
    n_targets) and resonant marks energies within the solver resonance
    threshold of the spectrum; the corresponding rows are not usable.
    """
    energies = np.asarray(energies, dtype=float)
    target_idx = np.asarray(target_idx, dtype=np.intp)
    w, v = eigensystem(h)
    thresh = RESONANCE_RTOL * max(h.scale(), 1.0)
    denom = w[None, :] - energies[:, None]
    resonant = np.min(np.abs(denom), axis=1) < thresh
    denom[resonant] = 1.0  # placeholder; rows flagged unusable
    coef = v[source_idx][None, :] / denom
    values = coef @ v[target_idx].T
    return values, resonant
