"""Command-line experiment orchestration.

Every command loads one flat config (defaults, then file, then --set
overrides), executes the corresponding library operation, and writes
JSON-lines plus CSV into the output directory together with a run manifest
(config hash, seed, package version, wall time, result checksums).  The
``replay`` command reruns a manifest and byte-compares the delimited result
files; the worker count may differ because estimates are schedule
independent.

Exit codes: 0 success, 1 replay mismatch, 2 configuration or usage error,
3 runtime failure after flushing partial results.
"""

from __future__ import annotations

import argparse
import hashlib
import json
import math
import os
import sys
import tempfile
import time
from pathlib import Path

from . import __version__, decay, msa, reporting, spectral
from .config import ConfigError, ExperimentConfig, parse_config_text
from .disorder import sample_potential
from .hamiltonian import assemble, dump_coo
from .lattice import projection_union_sites
from .montecarlo import (
    estimate_dsk,
    estimate_lifshitz,
    estimate_s0,
    estimate_w1,
    estimate_w2,
    verify_combes_thomas,
)

ENV_OUT = "ANDERSON2P_OUT"


def _sha256(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


def _cube_sample(cfg: ExperimentConfig, cube):
    sites = sorted(
        projection_union_sites(cube) if cube.is_two_particle else cube.sites()
    )
    return sample_potential(sites, cfg.distribution(), cfg.get_int("run.seed"), 0)


class CommandRun:
    """Output bookkeeping for one command invocation."""

    def __init__(self, command: str, cfg: ExperimentConfig, outdir: Path):
        self.command = command
        self.cfg = cfg
        self.outdir = outdir
        self.ref = f"{cfg.config_hash()}:{cfg.get_int('run.seed')}:{command}"
        self.results: list = []
        self.figures: list = []

    def write(self, records, header, rows) -> None:
        jsonl = self.outdir / f"{self.command}.jsonl"
        csvf = self.outdir / f"{self.command}.csv"
        reporting.write_jsonl(jsonl, records, self.ref)
        reporting.write_csv(csvf, header, rows, self.ref)
        self.results += [jsonl, csvf]

    def figure(self, render) -> None:
        if self.cfg.get_bool("output.figures", True):
            path = self.outdir / f"{self.command}.png"
            render(path)
            self.figures.append(path)


# -- commands ------------------------------------------------------------------


def cmd_schedule(run: CommandRun) -> None:
    sched = run.cfg.schedule()
    record = {
        "lengths": list(sched.lengths),
        "masses": list(sched.masses),
        "m0": sched.m0,
        "gamma": sched.gamma,
        "product_floor_ok": sched.product_floor_ok,
    }
    rows = [(k, L, m) for k, (L, m) in enumerate(zip(sched.lengths, sched.masses))]
    run.write([record], ["k", "L", "m"], rows)
    run.figure(lambda p: reporting.figure_schedule(sched, p))
    for k, L, m in rows:
        print(f"k={k} L={L} m={m:.6f}")
    print(f"product_floor_ok={sched.product_floor_ok}")


def cmd_spectrum(run: CommandRun) -> None:
    cfg = run.cfg
    cube = cfg.cube()
    h = assemble(cube, _cube_sample(cfg, cube), cfg.interaction())
    res = spectral.full_spectrum(h)
    rows = list(enumerate(res.eigenvalues))
    run.write(
        [{"cube": {"center": list(cube.center), "radius": cube.radius},
          "n_sites": cube.n_sites, "method": res.method,
          "min": float(res.eigenvalues[0]), "max": float(res.eigenvalues[-1])}],
        ["index", "eigenvalue"],
        rows,
    )
    if cfg.get_bool("spectrum.dump_matrix"):
        mtx = run.outdir / "spectrum.mtx"
        with open(mtx, "w") as fh:
            fh.write(f"# manifest={run.ref}\n")
            dump_coo(h, fh)
        run.results.append(mtx)
    run.figure(lambda p: reporting.figure_spectrum(res.eigenvalues, p))
    print(f"spectrum: {cube.n_sites} sites, "
          f"range [{res.eigenvalues[0]:.6f}, {res.eigenvalues[-1]:.6f}]")


def cmd_green(run: CommandRun) -> None:
    cfg = run.cfg
    cube = cfg.cube()
    h = assemble(cube, _cube_sample(cfg, cube), cfg.interaction())
    E = cfg.get_float("green.energy")
    row = spectral.green_row(h, E, cube.center)
    from .lattice import max_norm, point_sub

    dists = [max_norm(point_sub(s, cube.center)) for s in cube.sites()]
    rows = [
        (" ".join(map(str, s)), d, row.values[s])
        for s, d in zip(cube.sites(), dists)
    ]
    run.write(
        [{"energy": E, "source": list(cube.center),
          "condition_estimate": row.condition_estimate}],
        ["site", "distance", "value"],
        rows,
    )
    vals = [row.values[s] for s in cube.sites()]
    run.figure(lambda p: reporting.figure_green(dists, vals, p))
    print(f"green: E={E} condition~{row.condition_estimate:.3e}")


def cmd_classify(run: CommandRun) -> None:
    cfg = run.cfg
    cube = cfg.cube()
    sample = _cube_sample(cfg, cube)
    params = cfg.msa_params()
    interval = cfg.interval()
    interaction = cfg.interaction()
    m = cfg.get_float("classify.m", cfg.get_float("msa.m0"))
    prev = cfg.get_int("classify.prev_length")
    h = assemble(cube, sample, interaction)
    grid = msa.energy_grid(
        interval, [(spectral.eigenvalues(h), cube.radius)], params.beta
    )
    records = [
        msa.classify(
            cube, sample, interaction, float(E), m, params,
            interval=interval, prev_length=prev or None,
        ).to_record()
        for E in grid
    ]
    rows = [
        (r["E"], r["flags"]["R"], r["flags"]["CNR"], r["flags"]["S"],
         r["flags"]["T"], r["flags"]["interactive"], r["green_max"],
         r["spectral_distance"], r["mode"])
        for r in records
    ]
    run.write(
        records,
        ["E", "R", "CNR", "S", "T", "interactive", "green_max",
         "spectral_distance", "mode"],
        rows,
    )
    threshold = math.exp(-m * cube.radius)
    run.figure(lambda p: reporting.figure_classify(records, p, threshold))
    n_sing = sum(1 for r in records if r["flags"]["S"])
    print(f"classify: {len(records)} energies, {n_sing} singular at m={m}")


def _finish_estimates(run: CommandRun, results, title: str) -> None:
    header, rows = reporting.estimator_rows(results)
    run.write([r.to_record() for r in results], header, rows)
    run.figure(lambda p: reporting.figure_estimates(results, p, title))
    for r in results:
        print(
            f"{r.event_name}: L={r.L} estimate={r.estimate:.6g} "
            f"ci=({r.ci95[0]:.6g}, {r.ci95[1]:.6g}) n={r.n_samples} mode={r.mode}"
        )


def cmd_estimate_w1(run: CommandRun) -> None:
    cfg = run.cfg
    res = estimate_w1(
        L=cfg.get_int("w1.L", cfg.get_int("msa.L0")),
        E=cfg.get_float("w1.energy"),
        dist=cfg.distribution(),
        interaction=cfg.interaction(),
        params=cfg.msa_params(),
        n_samples=cfg.get_int("run.n_samples"),
        seed=cfg.get_int("run.seed"),
        mode=cfg.get("run.mode"),
        workers=cfg.get_int("run.workers"),
    )
    _finish_estimates(run, [res], "P{cube not completely non-resonant}")


def cmd_estimate_w2(run: CommandRun) -> None:
    cfg = run.cfg
    res = estimate_w2(
        L=cfg.get_int("w2.L", cfg.get_int("msa.L0")),
        pair_separation=cfg.get_int("w2.separation"),
        dist=cfg.distribution(),
        interaction=cfg.interaction(),
        params=cfg.msa_params(),
        n_samples=cfg.get_int("run.n_samples"),
        seed=cfg.get_int("run.seed"),
        mode=cfg.get("run.mode"),
        workers=cfg.get_int("run.workers"),
    )
    _finish_estimates(run, [res], "P{some E defeats both cubes of a distant pair}")


def cmd_estimate_s0(run: CommandRun) -> None:
    cfg = run.cfg
    res = estimate_s0(
        L0=cfg.get_int("msa.L0"),
        interval=cfg.interval(),
        m0=cfg.get_float("msa.m0"),
        dist=cfg.distribution(),
        interaction=cfg.interaction(),
        n_samples=cfg.get_int("run.n_samples"),
        seed=cfg.get_int("run.seed"),
        params=cfg.msa_params(),
        mode=cfg.get("run.mode"),
        workers=cfg.get_int("run.workers"),
    )
    _finish_estimates(run, [res], "P{some E in I makes the initial cube singular}")


def cmd_estimate_dsk(run: CommandRun) -> None:
    cfg = run.cfg
    res = estimate_dsk(
        k=cfg.get_int("msa.k"),
        schedule=cfg.schedule(),
        interval=cfg.interval(),
        pair_kind=cfg.pair_kind(),
        dist=cfg.distribution(),
        interaction=cfg.interaction(),
        params=cfg.msa_params(),
        n_samples=cfg.get_int("run.n_samples"),
        seed=cfg.get_int("run.seed"),
        mode=cfg.get("run.mode"),
        workers=cfg.get_int("run.workers"),
    )
    _finish_estimates(run, [res], "P{some E in I makes both scale-k cubes singular}")


def cmd_estimate_lifshitz(run: CommandRun) -> None:
    cfg = run.cfg
    results = []
    try:
        for L in cfg.get_ints("lifshitz.lengths"):
            results.append(
                estimate_lifshitz(
                    L0=int(L),
                    C=cfg.get_float("lifshitz.C"),
                    dist=cfg.distribution(),
                    particle_kind=cfg.get("lifshitz.particles"),
                    n_samples=cfg.get_int("lifshitz.n_samples",
                                          cfg.get_int("run.n_samples")),
                    seed=cfg.get_int("run.seed"),
                    d=cfg.get_int("model.d"),
                    mode=cfg.get("run.mode"),
                    workers=cfg.get_int("run.workers"),
                )
            )
    finally:
        if results:
            _finish_estimates(run, results, "P{E0 <= 2C/sqrt(L)} vs L")


def cmd_verify_ct(run: CommandRun) -> None:
    cfg = run.cfg
    report = verify_combes_thomas(
        n_instances=cfg.get_int("ct.instances"),
        seed=cfg.get_int("run.seed"),
        d=cfg.get_int("model.d"),
        L_range=(cfg.get_int("ct.L_min"), cfg.get_int("ct.L_max")),
        amplitude_max=cfg.get_float("ct.amplitude_max"),
        energies_per_instance=cfg.get_int("ct.energies"),
        r0=cfg.get_int("interaction.r0"),
    )
    header = ["instance", "L", "amplitude", "E", "delta", "n_pairs",
              "violations", "worst_margin"]
    rows = [[r[h] for h in header] for r in report.rows]
    run.write([report.to_record()] + report.rows, header, rows)
    run.figure(
        lambda p: reporting.figure_ct([r["worst_margin"] for r in report.rows], p)
    )
    print(f"violations: {report.violations}")
    print(f"checked {report.n_pairs_checked} site pairs over "
          f"{report.n_energies} energies; worst margin {report.worst_margin:.3e}")


def cmd_decay(run: CommandRun) -> None:
    cfg = run.cfg
    cube = cfg.cube()
    interval = cfg.interval()
    interaction = cfg.interaction()
    dist = cfg.distribution()
    seed = cfg.get_int("run.seed")
    max_states = cfg.get_int("decay.max_states")
    sites = sorted(
        projection_union_sites(cube) if cube.is_two_particle else cube.sites()
    )
    fits = []
    rows = []
    try:
        for idx in range(cfg.get_int("decay.n_samples")):
            sample = sample_potential(sites, dist, seed, idx)
            h = assemble(cube, sample, interaction)
            for fit in decay.decay_report(h, interval, max_states):
                fits.append(fit)
                rows.append(
                    (idx, fit.eigenvalue, fit.m_hat, fit.C_hat, fit.r2,
                     " ".join(map(str, fit.localization_center)))
                )
    finally:
        records = [dict(sample=r[0], **f.to_record()) for r, f in zip(rows, fits)]
        run.write(
            records,
            ["sample", "eigenvalue", "m_hat", "C_hat", "r2", "center"],
            rows,
        )
        if fits:
            run.figure(lambda p: reporting.figure_decay(fits, p))
    if fits:
        med = sorted(f.m_hat for f in fits)[len(fits) // 2]
        print(f"decay: {len(fits)} states fitted, median m_hat={med:.4f}")
    else:
        print("decay: no eigenvalues in the interval")


COMMANDS = {
    "schedule": cmd_schedule,
    "spectrum": cmd_spectrum,
    "green": cmd_green,
    "classify": cmd_classify,
    "estimate-w1": cmd_estimate_w1,
    "estimate-w2": cmd_estimate_w2,
    "estimate-s0": cmd_estimate_s0,
    "estimate-dsk": cmd_estimate_dsk,
    "estimate-lifshitz": cmd_estimate_lifshitz,
    "verify-ct": cmd_verify_ct,
    "decay": cmd_decay,
}


# -- manifest and replay --------------------------------------------------------


def _run_command(command: str, cfg: ExperimentConfig, outdir: Path) -> Path:
    outdir.mkdir(parents=True, exist_ok=True)
    run = CommandRun(command, cfg, outdir)
    t0 = time.monotonic()
    COMMANDS[command](run)
    manifest = {
        "command": command,
        "version": __version__,
        "config_hash": cfg.config_hash(),
        "seed": cfg.get_int("run.seed"),
        "workers": cfg.get_int("run.workers"),
        "wall_time_s": round(time.monotonic() - t0, 3),
        "config_text": cfg.canonical_text(),
        "results": [
            {"file": p.name, "sha256": _sha256(p)} for p in run.results
        ],
        "figures": [p.name for p in run.figures],
    }
    manifest_path = outdir / "manifest.json"
    manifest_path.write_text(json.dumps(manifest, indent=2, sort_keys=True))
    print(f"wrote {len(run.results)} result files to {outdir}")
    return manifest_path


def replay(manifest_path: str, workers: int | None = None) -> int:
    path = Path(manifest_path)
    if not path.exists():
        print(f"replay: manifest not found: {path}", file=sys.stderr)
        return 2
    manifest = json.loads(path.read_text())
    srcdir = path.parent
    missing = [
        r["file"] for r in manifest["results"] if not (srcdir / r["file"]).exists()
    ]
    if missing:
        print(f"replay: missing result files: {missing}", file=sys.stderr)
        return 2
    cfg = ExperimentConfig(parse_config_text(manifest["config_text"]))
    cfg.values["run.workers"] = str(workers if workers is not None else 1)
    cfg.values["output.figures"] = "false"
    with tempfile.TemporaryDirectory(prefix="anderson2p-replay-") as tmp:
        cfg.values["output.directory"] = tmp
        _run_command(manifest["command"], cfg, Path(tmp))
        mismatched = []
        for entry in manifest["results"]:
            fresh = Path(tmp) / entry["file"]
            if not fresh.exists() or _sha256(fresh) != entry["sha256"]:
                mismatched.append(entry["file"])
    # the original files must also still match their recorded checksums
    tampered = [
        r["file"]
        for r in manifest["results"]
        if _sha256(srcdir / r["file"]) != r["sha256"]
    ]
    if mismatched or tampered:
        if mismatched:
            print(f"replay: regenerated files differ: {mismatched}", file=sys.stderr)
        if tampered:
            print(f"replay: stored files were modified: {tampered}", file=sys.stderr)
        return 1
    print("replay: match")
    return 0


# -- entry point ----------------------------------------------------------------


def _add_common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="path to a key = value config file")
    p.add_argument("--seed", type=int, help="override run.seed")
    p.add_argument("--workers", type=int, help="override run.workers")
    p.add_argument("--out", help="output directory (default: $ANDERSON2P_OUT or ./out)")
    p.add_argument(
        "--set",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        dest="overrides",
        help="override a single config value (repeatable)",
    )
    p.add_argument(
        "--exhaustive",
        action="store_true",
        help="force exact enumeration over the disorder support",
    )


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="anderson2p",
        description="Finite-volume two-particle localization experiments",
    )
    sub = parser.add_subparsers(dest="command")
    for name in COMMANDS:
        _add_common(sub.add_parser(name, help=f"run the {name} experiment"))
    rp = sub.add_parser("replay", help="rerun a manifest and byte-compare results")
    rp.add_argument("manifest")
    rp.add_argument("--workers", type=int)
    args = parser.parse_args(argv)

    if args.command is None:
        parser.print_usage(sys.stderr)
        return 2
    if args.command == "replay":
        return replay(args.manifest, args.workers)

    try:
        cfg = ExperimentConfig.from_sources(
            config_path=args.config,
            overrides=args.overrides,
            seed=args.seed,
            workers=args.workers,
            outdir=args.out,
            exhaustive=args.exhaustive,
        )
    except (ConfigError, OSError) as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    outdir = Path(
        cfg.get("output.directory") or os.environ.get(ENV_OUT) or "out"
    )
    try:
        _run_command(args.command, cfg, outdir)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # partial results are already on disk
        print(f"run failed ({type(exc).__name__}): {exc}", file=sys.stderr)
        return 3
    return 0


if __name__ == "__main__":
    sys.exit(main())
