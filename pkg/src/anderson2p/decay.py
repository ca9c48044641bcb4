"""Exponential-decay fitting for finite-volume eigenfunctions.

A localized state is summarized by the envelope |psi(x)| <= C * exp(-m*r)
with r the max-norm distance from the localization center.  The fit runs on
shell maxima (the largest |psi| at each distance), so the fitted line is a
true envelope up to the reported slack; measuring from the localization
center rather than the cube center avoids spurious rates for states pinned
near the boundary.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import spectral
from .hamiltonian import HamiltonianMatrix
from .lattice import Cube, Point, max_norm, point_sub
from .msa import EnergyInterval

AMPLITUDE_FLOOR = 1e-12


class FitError(ValueError):
    """Not enough usable shells to fit a decay rate."""


@dataclass
class DecayFitResult:
    eigenvalue: float
    m_hat: float
    C_hat: float
    r2: float
    localization_center: Point
    slack: float
    n_shells: int

    def to_record(self) -> dict:
        return {
            "eigenvalue": self.eigenvalue,
            "m_hat": self.m_hat,
            "C_hat": self.C_hat,
            "r2": self.r2,
            "center": list(self.localization_center),
            "slack": self.slack,
            "n_shells": self.n_shells,
        }


def shell_maxima(values, cube: Cube, center: Point) -> dict:
    """Largest |psi| at each max-norm distance from the center."""
    out: dict = {}
    amp = np.abs(np.asarray(values, dtype=float))
    for site, a in zip(cube.sites(), amp):
        r = max_norm(point_sub(site, center))
        if a > out.get(r, 0.0):
            out[r] = float(a)
    return out


def fit_decay(values, cube: Cube, center: Optional[Point] = None,
              eigenvalue: float = math.nan) -> DecayFitResult:
    """Least-squares decay rate of log shell maxima vs distance.

    ``center`` defaults to the site of largest amplitude.  Shells whose
    maximum sits below the solver noise floor are dropped; fewer than three
    usable shells raise :class:`FitError`.
    """
    amp = np.abs(np.asarray(values, dtype=float))
    if amp.size != cube.n_sites:
        raise ValueError("vector length does not match the cube site count")
    if not np.any(amp > 0):
        raise FitError("zero vector")
    if center is None:
        center = cube.sites()[int(np.argmax(amp))]
    elif center not in cube.site_index():
        raise ValueError(f"center {center} not in cube")
    shells = shell_maxima(amp, cube, center)
    usable = sorted(r for r, v in shells.items() if v >= AMPLITUDE_FLOOR)
    if len(usable) < 3:
        raise FitError(f"only {len(usable)} usable shells")
    x = np.array(usable, dtype=float)
    y = np.log([shells[r] for r in usable])
    slope, intercept = np.polyfit(x, y, 1)
    yhat = slope * x + intercept
    ss_res = float(np.sum((y - yhat) ** 2))
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 if ss_tot == 0.0 else max(0.0, 1.0 - ss_res / ss_tot)
    m_hat = -float(slope)
    # envelope slack: by how many shells the fitted line must be relaxed to
    # dominate every used shell maximum
    resid = y - yhat
    slack = float(np.max(resid) / m_hat) if m_hat > 1e-12 else 0.0
    return DecayFitResult(
        eigenvalue=float(eigenvalue),
        m_hat=m_hat,
        C_hat=float(math.exp(intercept)),
        r2=float(min(1.0, r2)),
        localization_center=center,
        slack=slack,
        n_shells=len(usable),
    )


def decay_report(
    h: HamiltonianMatrix, interval: EnergyInterval, max_states: int
) -> list:
    """Decay fits for the lowest eigenpairs with eigenvalue in the interval.

    Fetches a partial eigendecomposition first and widens it only if the
    interval is not exhausted, so large cubes avoid the full solve.
    """
    if max_states < 1:
        raise ValueError("max_states must be positive")
    want = min(h.n, max_states * 2 + 16)
    while True:
        vals, vecs = spectral.lowest_eigenpairs(h, want)
        if want == h.n or vals[-1] > interval.e_high:
            break
        want = min(h.n, want * 2)
    out = []
    for k, lam in enumerate(vals):
        if lam > interval.e_high:
            break
        if lam < interval.e_low:
            continue
        out.append(fit_decay(vecs[:, k], h.cube, eigenvalue=float(lam)))
        if len(out) >= max_states:
            break
    return out
