"""Result persistence and figure rendering.

Delimited outputs are the primary artifacts: JSON-lines (one record per
line, UTF-8, sorted keys) and RFC-quoted CSV, each opening with a manifest
reference so no result floats free of its provenance.  Figures are rendered
from the same data as a convenience layer and carry no information the
delimited files lack; replay comparison ignores them.
"""

from __future__ import annotations

import csv
import json
import math

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np


def _clean(value):
    if isinstance(value, float) and not math.isfinite(value):
        return None
    if isinstance(value, (np.floating, np.integer)):
        return value.item()
    if isinstance(value, (list, tuple)):
        return [_clean(v) for v in value]
    if isinstance(value, dict):
        return {k: _clean(v) for k, v in value.items()}
    return value


def write_jsonl(path, records, manifest_ref: str) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(json.dumps({"manifest": manifest_ref}, sort_keys=True) + "\n")
        for rec in records:
            fh.write(json.dumps(_clean(rec), sort_keys=True) + "\n")


def write_csv(path, header, rows, manifest_ref: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(f"# manifest={manifest_ref}\n")
        writer = csv.writer(fh, quoting=csv.QUOTE_MINIMAL)
        writer.writerow(header)
        for row in rows:
            writer.writerow(["" if v is None else v for v in (_clean(x) for x in row)])


def estimator_rows(results):
    header = ["event", "L", "k", "estimate", "ci_lo", "ci_hi", "n", "bound",
              "mode", "seed"]
    rows = [
        [r.event_name, r.L, r.k, r.estimate, r.ci95[0], r.ci95[1],
         r.n_samples, r.paper_bound, r.mode, r.seed]
        for r in results
    ]
    return header, rows


# -- figures ------------------------------------------------------------------


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)


def figure_estimates(results, path, title: str) -> None:
    """Estimates with exact CIs against the scale, plus the attached bound."""
    fig, ax = plt.subplots(figsize=(6, 4))
    xs = [r.L if r.L is not None else i for i, r in enumerate(results)]
    ys = [r.estimate for r in results]
    lo = [r.estimate - r.ci95[0] for r in results]
    hi = [r.ci95[1] - r.estimate for r in results]
    ax.errorbar(xs, ys, yerr=[lo, hi], fmt="o-", capsize=4, label="estimate")
    bounds = [r.paper_bound for r in results if r.paper_bound]
    if bounds and max(bounds) > 1e-12:
        ax.plot(xs, [r.paper_bound for r in results], "r--", label="bound")
    ax.set_xlabel("L")
    ax.set_ylabel("probability")
    ax.set_title(title)
    ax.legend()
    _save(fig, path)


def figure_schedule(schedule, path) -> None:
    fig, ax1 = plt.subplots(figsize=(6, 4))
    ks = list(range(len(schedule.lengths)))
    ax1.semilogy(ks, schedule.lengths, "o-", color="tab:blue", label="L_k")
    ax1.set_xlabel("k")
    ax1.set_ylabel("length", color="tab:blue")
    ax2 = ax1.twinx()
    ax2.plot(ks, schedule.masses, "s--", color="tab:red", label="m_k")
    ax2.set_ylabel("mass", color="tab:red")
    ax1.set_title("scale lengths and masses")
    _save(fig, path)


def figure_spectrum(eigenvalues, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.step(range(len(eigenvalues)), eigenvalues, where="post")
    ax.set_xlabel("index")
    ax.set_ylabel("eigenvalue")
    ax.set_title("finite-volume spectrum")
    _save(fig, path)


def figure_green(distances, values, path, rate: float | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    v = np.abs(np.asarray(values, dtype=float))
    keep = v > 0
    ax.semilogy(np.asarray(distances)[keep], v[keep], ".", label="|G|")
    if rate is not None and rate > 0:
        d = np.linspace(0, max(distances), 50)
        ax.semilogy(d, np.exp(-rate * d) * max(v), "r--",
                    label=f"exp(-{rate:.3g} r)")
        ax.legend()
    ax.set_xlabel("max-norm distance from source")
    ax.set_ylabel("|G|")
    ax.set_title("Green function decay")
    _save(fig, path)


def figure_classify(records, path, threshold: float | None = None) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    es = [r["E"] for r in records]
    gm = [r["green_max"] if r["green_max"] is not None else np.nan for r in records]
    ax.semilogy(es, gm, "o-", label="max boundary |G|")
    if threshold:
        ax.axhline(threshold, color="r", linestyle="--", label="exp(-mL)")
    singular = [r["E"] for r in records if r["flags"]["S"]]
    if singular:
        ax.plot(singular, [threshold or 1.0] * len(singular), "rx", label="singular")
    ax.set_xlabel("E")
    ax.set_ylabel("|G|")
    ax.set_title("cube classification across the energy grid")
    ax.legend()
    _save(fig, path)


def figure_ct(margins, path) -> None:
    fig, ax = plt.subplots(figsize=(6, 4))
    m = np.asarray(margins, dtype=float)
    ax.hist(np.log10(m[m > 0]), bins=40)
    ax.set_xlabel("log10 worst margin per energy")
    ax.set_ylabel("count")
    ax.set_title("decay-bound margins (violations would sit at < 0)")
    _save(fig, path)


def figure_decay(fits, path) -> None:
    fig, axes = plt.subplots(1, 2, figsize=(9, 4))
    axes[0].plot([f.eigenvalue for f in fits], [f.m_hat for f in fits], "o")
    axes[0].set_xlabel("eigenvalue")
    axes[0].set_ylabel("fitted rate")
    axes[1].hist([f.m_hat for f in fits], bins=20)
    axes[1].set_xlabel("fitted rate")
    axes[1].set_ylabel("count")
    fig.suptitle("eigenfunction decay rates")
    _save(fig, path)
