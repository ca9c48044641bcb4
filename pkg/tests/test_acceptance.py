"""Acceptance suite: one test per criterion, at the stated tolerances.

Run with ``pytest tests/test_acceptance.py -v -s`` to see one PASS/FAIL
line per criterion.  Criterion 4 is implemented exactly as stated and is
expected to run red on measured grounds; see the analysis in the assertion
message (the probability is saturated near 1 at C=1 for L in {10,20,40},
so neither the strict decrease nor the CI separation can materialize at
n=2000).  A passing trend demonstration at C=0.3 follows it as a
non-acceptance regression test.
"""

import math
import time

import numpy as np
import pytest

import oracles
from anderson2p.cli import main, replay
from anderson2p.decay import decay_report
from anderson2p.disorder import DistributionSpec, sample_potential
from anderson2p.hamiltonian import assemble, assemble_single_particle, tensor_sum_spectrum
from anderson2p.lattice import Cube, InteractionSpec, is_interactive, projection_union_sites
from anderson2p.montecarlo import (
    canonical_pair,
    estimate_dsk,
    estimate_lifshitz,
    estimate_s0,
    estimate_w1,
    estimate_w2,
    exhaustive_indicator_correlation,
    verify_combes_thomas,
)
from anderson2p.msa import (
    CubeClassifier,
    EnergyInterval,
    MsaParameters,
    MsaSchedule,
    energy_grid,
    length_schedule,
    mass_schedule,
    ndrons_mass,
    two_particle_tunnelling,
)
from anderson2p.spectral import eigenvalues, lowest_eigenpair


def _verdict(num: int, ok: bool, detail: str) -> None:
    print(f"\nACCEPTANCE {num:02d} {'PASS' if ok else 'FAIL'}: {detail}", flush=True)
    assert ok, f"criterion {num}: {detail}"


# -- 1: Combes-Thomas hard inequality ------------------------------------------


def test_acceptance_01_combes_thomas():
    t0 = time.monotonic()
    report = verify_combes_thomas(
        n_instances=200, seed=2024, d=1, L_range=(2, 8),
        amplitude_max=2.0, energies_per_instance=5,
    )
    elapsed = time.monotonic() - t0
    ok = report.violations == 0 and elapsed <= 60.0
    _verdict(
        1, ok,
        f"{report.violations} violations over {report.n_pairs_checked} site "
        f"pairs ({report.n_energies} energies), worst margin "
        f"{report.worst_margin:.3e}, {elapsed:.1f}s (cap 60s)",
    )


# -- 2: tensor decomposition on non-interactive cubes ---------------------------


def test_acceptance_02_tensor_decomposition():
    t0 = time.monotonic()
    rng = np.random.default_rng(7)
    interaction = InteractionSpec(1, (1.5, 0.5))
    checked = 0
    worst = 0.0
    while checked < 50:
        L = int(rng.integers(1, 7))
        gap = int(rng.integers(2 * L + interaction.r0 + 1, 2 * L + interaction.r0 + 30))
        u1 = int(rng.integers(-10, 11))
        cube = Cube((u1, u1 + gap), L, 1)
        if is_interactive(cube, interaction.r0):
            continue
        sites = sorted(projection_union_sites(cube))
        sample = sample_potential(
            sites, DistributionSpec.uniform(0, 1, amplitude=float(rng.uniform(0.5, 3))),
            seed=900, index=checked,
        )
        h = assemble(cube, sample, interaction)
        full = eigenvalues(h)
        p1, p2 = cube.projections()
        s1 = eigenvalues(assemble_single_particle(p1, sample))
        s2 = eigenvalues(assemble_single_particle(p2, sample))
        combo = tensor_sum_spectrum(s1, s2)
        rel = np.max(np.abs(full - combo) / np.maximum(np.abs(combo), 1e-12))
        worst = max(worst, float(rel))
        assert np.allclose(full, combo, rtol=1e-9, atol=1e-12)
        checked += 1
    elapsed = time.monotonic() - t0
    ok = worst < 1e-9 and elapsed <= 30.0
    _verdict(
        2, ok,
        f"50 non-interactive cubes, worst relative deviation {worst:.2e} "
        f"(tol 1e-9), {elapsed:.1f}s (cap 30s)",
    )


# -- 3: exhaustive mode equals brute force; Monte Carlo within its CI -----------

BERN = DistributionSpec.bernoulli(0.5)
U3 = InteractionSpec(1, (1.0, 0.5))
N_MC = 100_000
MC_WORKERS = 4


def _check_exhaustive_and_mc(num_label, exhaustive_result, exact, mc_result):
    assert exhaustive_result.mode == "exhaustive"
    assert mc_result.mode == "montecarlo"
    same = exhaustive_result.estimate == exact
    inside = mc_result.ci95[0] <= exact <= mc_result.ci95[1]
    return same, inside


def test_acceptance_03_w1_exhaustive_oracle():
    L, E = 3, 1.0
    params = MsaParameters(grid_points=8)
    ex = estimate_w1(L, E, BERN, U3, params, 10, seed=31)
    cube = Cube((0, 0), L, 1)
    exact = oracles.enumerate_probability(
        sorted(projection_union_sites(cube)), BERN.support(),
        lambda vals: oracles.not_cnr(cube, vals, U3, E),
    )
    mc = estimate_w1(L, E, BERN, U3, params, N_MC, seed=32,
                     mode="montecarlo", workers=MC_WORKERS)
    same, inside = _check_exhaustive_and_mc("W1", ex, exact, mc)
    _verdict(
        3, same and inside and 0 < exact < 1,
        f"W1: exhaustive {ex.estimate:.8f} == oracle {exact:.8f}: {same}; "
        f"MC {mc.estimate:.5f} CI covers oracle: {inside}",
    )


def test_acceptance_03_w2_exhaustive_oracle():
    dist = DistributionSpec.bernoulli(0.5, amplitude=6.0)
    params = MsaParameters(beta=0.9, grid_points=8)
    ex = estimate_w2(2, None, dist, U3, params, 10, seed=33)
    c1, c2 = canonical_pair("I", 2, 1, 1)
    exact = oracles.enumerate_probability(
        sorted(projection_union_sites(c1) | projection_union_sites(c2)),
        dist.support(),
        lambda vals: oracles.w2_event(c1, c2, vals, U3, beta=0.9),
    )
    mc = estimate_w2(2, None, dist, U3, params, N_MC, seed=34,
                     mode="montecarlo", workers=MC_WORKERS)
    same, inside = _check_exhaustive_and_mc("W2", ex, exact, mc)
    _verdict(
        3, same and inside and 0 < exact < 1,
        f"W2: exhaustive {ex.estimate:.8f} == oracle {exact:.8f}: {same}; "
        f"MC {mc.estimate:.5f} CI covers oracle: {inside}",
    )


def test_acceptance_03_s0_exhaustive_oracle():
    interval = EnergyInterval(0.0, 1.0, grid_points=8)
    params = MsaParameters(grid_points=8)
    ex = estimate_s0(3, interval, 0.4, BERN, U3, 10, seed=35, params=params)
    cube = Cube((0, 0), 3, 1)
    exact = oracles.enumerate_probability(
        sorted(projection_union_sites(cube)), BERN.support(),
        lambda vals: oracles.s0_event(cube, vals, U3, interval, 0.4),
    )
    mc = estimate_s0(3, interval, 0.4, BERN, U3, N_MC, seed=36, params=params,
                     mode="montecarlo", workers=MC_WORKERS)
    same, inside = _check_exhaustive_and_mc("S0", ex, exact, mc)
    _verdict(
        3, same and inside and 0 < exact < 1,
        f"S0: exhaustive {ex.estimate:.8f} == oracle {exact:.8f}: {same}; "
        f"MC {mc.estimate:.5f} CI covers oracle: {inside}",
    )


def test_acceptance_03_dsk_exhaustive_oracle():
    sched = MsaSchedule.build(L0=3, m0=0.4, gamma=0.5, K=1)
    interval = EnergyInterval(0.0, 1.2, grid_points=6)
    params = MsaParameters(grid_points=6)
    ex = estimate_dsk(0, sched, interval, "mixed", BERN, U3, params, 10, seed=37)
    c1, c2 = canonical_pair("mixed", 3, 1, 1)
    exact = oracles.enumerate_probability(
        sorted(projection_union_sites(c1) | projection_union_sites(c2)),
        BERN.support(),
        lambda vals: oracles.dsk_event(c1, c2, vals, U3, interval, sched.masses[0]),
    )
    mc = estimate_dsk(0, sched, interval, "mixed", BERN, U3, params, N_MC,
                      seed=38, mode="montecarlo", workers=MC_WORKERS)
    same, inside = _check_exhaustive_and_mc("DSk", ex, exact, mc)
    _verdict(
        3, same and inside and 0 < exact < 1,
        f"DSk: exhaustive {ex.estimate:.8f} == oracle {exact:.8f}: {same}; "
        f"MC {mc.estimate:.5f} CI covers oracle: {inside}",
    )


# -- 4: Lifshitz-tail trend ------------------------------------------------------


def test_acceptance_04_lifshitz_trend():
    # Stated constants: Bernoulli(1/2) on {0,1}, C=1, L in {10,20,40}, n=2000.
    # Measured at n=20000 the true probabilities are ~{0.9966, 0.9965, 0.9941}:
    # saturated near 1, so the strict decrease with non-overlapping CIs cannot
    # materialize at these scales (see the decisions ledger analysis).  The
    # criterion is implemented faithfully and left to report honestly.
    t0 = time.monotonic()
    dist = DistributionSpec.bernoulli(0.5, levels=(0.0, 1.0))
    results = [
        estimate_lifshitz(L, 1.0, dist, "one", 2000, seed=40 + L,
                          mode="montecarlo")
        for L in (10, 20, 40)
    ]
    elapsed = time.monotonic() - t0
    ests = [r.estimate for r in results]
    decreasing = all(a > b for a, b in zip(ests, ests[1:]))
    separated = all(
        results[i + 1].ci95[1] < results[i].ci95[0] for i in range(len(results) - 1)
    )
    ok = decreasing and separated and elapsed <= 300.0
    _verdict(
        4, ok,
        "P{E0 <= 2/sqrt(L)} at L=10,20,40: "
        + ", ".join(
            f"{r.estimate:.4f} ci=({r.ci95[0]:.4f},{r.ci95[1]:.4f})" for r in results
        )
        + f"; strictly decreasing: {decreasing}, CIs separated: {separated}, "
        f"{elapsed:.1f}s (cap 300s)",
    )


def test_lifshitz_trend_demonstration_small_threshold():
    # the qualitative tail decay does materialize at a smaller threshold
    dist = DistributionSpec.bernoulli(0.5, levels=(0.0, 1.0))
    results = [
        estimate_lifshitz(L, 0.3, dist, "one", 6000, seed=40 + L,
                          mode="montecarlo", workers=2)
        for L in (10, 20, 40)
    ]
    ests = [r.estimate for r in results]
    assert all(a > b for a, b in zip(ests, ests[1:]))
    assert all(
        results[i + 1].ci95[1] < results[i].ci95[0] for i in range(len(results) - 1)
    )


# -- 5: interaction monotonicity ---------------------------------------------------


def test_acceptance_05_interaction_monotonicity():
    rng = np.random.default_rng(55)
    worst = math.inf
    for idx in range(100):
        L = int(rng.integers(1, 4))
        gap = int(rng.integers(0, 2 * L + 2))
        cube = Cube((0, gap), L, 1)
        sites = sorted(projection_union_sites(cube))
        dist = DistributionSpec.uniform(0, 1, amplitude=float(rng.uniform(0, 3)))
        sample = sample_potential(sites, dist, seed=500, index=idx)
        r0 = int(rng.integers(0, 3))
        profile = tuple(float(rng.uniform(0, 2)) for _ in range(r0 + 1))
        base = assemble(cube, sample, InteractionSpec.zero())
        bumped = assemble(cube, sample, InteractionSpec(r0, profile))
        e_base, _ = lowest_eigenpair(base)
        e_bump, _ = lowest_eigenpair(bumped)
        worst = min(worst, e_bump - e_base)
        assert e_bump >= e_base - 1e-10
    _verdict(
        5, worst >= -1e-10,
        f"100 samples, min E0 shift under nonnegative interaction {worst:.3e} "
        f"(slack 1e-10)",
    )


# -- 6: schedule formulas -------------------------------------------------------------


def test_acceptance_06_schedule_formulas():
    import mpmath

    mpmath.mp.dps = 60

    ok_lengths = length_schedule(10, 1.5, 2) == [10, 31, 172]

    lengths = length_schedule(5, 1.5, 4)
    masses, _ = mass_schedule(0.7, 0.5, lengths)
    direct = [0.7]
    for L in lengths[1:]:
        direct.append(direct[-1] * (1 - 0.5 / math.sqrt(L)))
    ok_masses = all(abs(a - b) <= 1e-12 for a, b in zip(masses, direct))

    def oracle_product(gamma):
        ls = [5]
        while ls[-1] < 10**24:
            ls.append(math.isqrt(ls[-1] ** 3))
        prod = mpmath.mpf(1)
        for L in ls[1:]:
            prod *= 1 - mpmath.mpf(gamma) / mpmath.sqrt(L)
        return prod

    table = {}
    for label, gamma in (("pass", 0.3), ("borderline", 1.05), ("fail", 1.6)):
        exact = oracle_product(gamma)
        _, flag = mass_schedule(1.0, gamma, lengths)
        table[label] = (float(exact), flag, flag == (exact >= 0.5))
    ok_floor = all(v[2] for v in table.values())
    ok = ok_lengths and ok_masses and ok_floor
    _verdict(
        6, ok,
        f"lengths(10): {ok_lengths}; masses at 1e-12: {ok_masses}; floor table "
        + ", ".join(f"{k}: prod={v[0]:.4f} flag={v[1]}" for k, v in table.items()),
    )


# -- 7: non-interactive reduction implication ------------------------------------------


def test_acceptance_07_ndrons_implication():
    L, prev = 11, 5
    m_prime = 0.6
    cube = Cube((0, 24), L, 1)
    assert not is_interactive(cube, 0)
    interaction = InteractionSpec.zero()
    params = MsaParameters(d=1, grid_points=17)
    interval = EnergyInterval(0.0, 0.4, grid_points=17)
    dist = DistributionSpec.uniform(0, 1, amplitude=2.0)
    sites = sorted(projection_union_sites(cube))
    mass = ndrons_mass(m_prime, L, 1).mass
    assert mass > 0
    qualifying = violations = nt_count = 0
    for idx in range(100):
        sample = sample_potential(sites, dist, seed=700, index=idx)
        if two_particle_tunnelling(cube, sample, interval, m_prime, prev, params):
            continue  # hypothesis (ii) fails
        nt_count += 1
        cl = CubeClassifier(cube, sample, interaction, params)
        grid = energy_grid(interval, [(eigenvalues(cl.ham()), L)], params.beta)
        for E in grid:
            if cl.is_cnr(float(E)):
                qualifying += 1
                if cl.is_singular(float(E), mass):
                    violations += 1
    ok = violations == 0 and qualifying > 0
    _verdict(
        7, ok,
        f"{nt_count}/100 instances non-tunnelling, {qualifying} qualifying "
        f"(CNR) energies, {violations} singularity violations at reduced mass "
        f"{mass:.4f}",
    )


# -- 8: localization contrast ------------------------------------------------------------


def test_acceptance_08_localization_contrast():
    t0 = time.monotonic()
    cube = Cube((0, 0), 20, 1)
    sites = sorted(projection_union_sites(cube))
    interval = EnergyInterval(0.0, 50.0)
    stats = {}
    for amp in (4.0, 0.0):
        dist = DistributionSpec.uniform(0, 1, amplitude=amp)
        ms, r2s = [], []
        for idx in range(20):
            sample = sample_potential(sites, dist, seed=800, index=idx)
            h = assemble(cube, sample, InteractionSpec.zero())
            for fit in decay_report(h, interval, 10):
                ms.append(fit.m_hat)
                r2s.append(fit.r2)
        assert len(ms) == 200
        stats[amp] = (float(np.median(ms)), float(np.median(r2s)))
    elapsed = time.monotonic() - t0
    m_dis, r2_dis = stats[4.0]
    m_clean, _ = stats[0.0]
    ok = m_dis > 0.05 and m_clean < 0.05 and r2_dis > 0.8 and elapsed <= 600.0
    _verdict(
        8, ok,
        f"median m_hat disordered {m_dis:.4f} (> 0.05), clean {m_clean:.4f} "
        f"(< 0.05), median disordered r2 {r2_dis:.3f} (> 0.8), "
        f"{elapsed:.1f}s (cap 600s)",
    )


# -- 9: reproducibility across worker counts ------------------------------------------


FAST_OVERRIDES = [
    "--set", "msa.L0=3",
    "--set", "msa.K=2",
    "--set", "cube.radius=2",
    "--set", "run.n_samples=40",
    "--set", "msa.grid_points=6",
    "--set", "model.dist=bernoulli",
    "--set", "interval.e_high=1.0",
    "--set", "ct.instances=4",
    "--set", "ct.energies=2",
    "--set", "lifshitz.lengths=4, 6",
    "--set", "lifshitz.n_samples=30",
    "--set", "decay.max_states=3",
    "--set", "output.figures=false",
]

ALL_COMMANDS = [
    "schedule", "spectrum", "green", "classify", "estimate-w1", "estimate-w2",
    "estimate-s0", "estimate-dsk", "estimate-lifshitz", "verify-ct", "decay",
]


def test_acceptance_09_replay_across_worker_counts(tmp_path):
    failures = []
    for command in ALL_COMMANDS:
        out = tmp_path / command
        rc = main([command, "--out", str(out), "--seed", "9", *FAST_OVERRIDES])
        if rc != 0:
            failures.append(f"{command}: run rc={rc}")
            continue
        manifest = out / "manifest.json"
        for workers in (1, 4):
            rc = replay(str(manifest), workers=workers)
            if rc != 0:
                failures.append(f"{command}: replay workers={workers} rc={rc}")
    _verdict(
        9, not failures,
        f"replay byte-matched for {len(ALL_COMMANDS)} commands at workers "
        f"{{1, 4}}" + (f"; failures: {failures}" if failures else ""),
    )


# -- 10: independence of disjoint-projection interactive pairs -------------------------


def test_acceptance_10_independence_structure():
    c1, c2 = canonical_pair("I", 2, 1, 1)
    corr = exhaustive_indicator_correlation(
        c1, c2, E=1.2, m=0.4, dist=BERN, interaction=U3,
        params=MsaParameters(grid_points=8),
    )
    _verdict(
        10, corr == 0.0,
        f"exhaustive singularity-indicator correlation = {corr!r} (exact 0.0 "
        f"required)",
    )
