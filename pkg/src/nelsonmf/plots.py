"""Figure rendering for run tables.

Each experiment's CSV gets one PNG next to it. Rendering is pure
post-processing: figures are built from the emitted table alone, never
from in-memory state, so a plot can always be regenerated from artifacts.
The PNG writer strips the mutable Software tag to keep reruns
byte-identical.
"""

from __future__ import annotations

import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

PNG_METADATA = {"Software": None}
FIGSIZE = (7.0, 4.5)


def _read_table(path) -> dict:
    with open(path, "r", encoding="utf-8", newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        columns = {name: [] for name in header}
        for row in reader:
            for name, cell in zip(header, row):
                columns[name].append(cell)
    return columns


def _floats(columns: dict, name: str) -> list:
    return [float(x) for x in columns[name]]


def _save(fig, png_path) -> None:
    fig.tight_layout()
    fig.savefig(png_path, dpi=150, metadata=PNG_METADATA)
    plt.close(fig)


def render_skg_run(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, (left, right) = plt.subplots(1, 2, figsize=FIGSIZE)
    time = _floats(t, "time")
    left.plot(time, _floats(t, "alpha_norm"), label="field norm")
    left.plot(time, _floats(t, "alpha_bound"), "--", label="growth bound")
    left.set_xlabel("time")
    left.set_ylabel("lattice L2 norm")
    left.legend()
    right.semilogy(
        time, [max(v, 1e-18) for v in _floats(t, "gram_deviation")],
        label="Gram deviation",
    )
    drift = [max(abs(v), 1e-18) for v in _floats(t, "energy_drift")]
    right.semilogy(time, drift, label="|energy drift|")
    right.set_xlabel("time")
    right.legend()
    _save(fig, png_path)


def render_free_compare(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    ax.plot(_floats(t, "time"), _floats(t, "trace_distance"))
    ax.set_xlabel("time")
    ax.set_ylabel("normalized projector trace distance")
    _save(fig, png_path)


def render_semiclassical_scan(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    k_cols = [name for name in t if name.startswith("k_")]
    groups = defaultdict(list)
    for i in range(len(t["time"])):
        key = ",".join(t[name][i] for name in k_cols)
        groups[key].append(i)
    for key, idx in groups.items():
        time = [float(t["time"][i]) for i in idx]
        ax.plot(time, [float(t["tn_peq"][i]) for i in idx], label=f"k=({key})")
    ax.set_xlabel("time")
    ax.set_ylabel("trace norm of p e^(ikx) q")
    if groups:
        ax.legend()
    _save(fig, png_path)


def render_fock_verify(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    time = _floats(t, "time")
    for name in ("beta_a1", "beta_a2", "beta_b", "beta_total"):
        ax.semilogy(time, [max(abs(v), 1e-18) for v in _floats(t, name)], label=name)
    ax.set_xlabel("time")
    ax.set_ylabel("deviation functionals")
    ax.legend()
    _save(fig, png_path)


def render_theorem2_scaling(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, (left, right) = plt.subplots(1, 2, figsize=FIGSIZE)
    rows = defaultdict(list)
    for i in range(len(t["time"])):
        rows[t["delta"][i]].append(i)
    finals = []
    for delta, idx in rows.items():
        time = [float(t["time"][i]) for i in idx]
        dist = [float(t["trace_distance"][i]) for i in idx]
        left.plot(time, dist, label=f"delta={delta}")
        finals.append((float(delta), dist[-1]))
    left.set_xlabel("time")
    left.set_ylabel("normalized trace distance")
    left.legend()
    finals.sort()
    deltas = [d for d, _ in finals]
    values = [v for _, v in finals]
    right.loglog(deltas, values, "o-", label="measured")
    if values and values[-1] > 0:
        guide = [values[-1] * d / deltas[-1] for d in deltas]
        right.loglog(deltas, guide, "--", label="linear guide")
    right.set_xlabel("field scale")
    right.set_ylabel("final distance")
    right.legend()
    _save(fig, png_path)


def render_convergence_study(csv_path, png_path) -> None:
    t = _read_table(csv_path)
    fig, ax = plt.subplots(figsize=FIGSIZE)
    sections = defaultdict(list)
    for i in range(len(t["section"])):
        sections[t["section"][i]].append(i)
    for section, idx in sections.items():
        steps = [float(t["dt"][i]) for i in idx]
        errors = [max(float(t["error"][i]), 1e-18) for i in idx]
        ax.loglog(steps, errors, "o-", label=section)
    if sections:
        any_idx = next(iter(sections.values()))
        steps = sorted(float(t["dt"][i]) for i in any_idx)
        base = max(float(t["error"][i]) for i in any_idx)
        if base > 0 and steps:
            guide = [base * (s / steps[-1]) ** 2 for s in steps]
            ax.loglog(steps, guide, "k--", alpha=0.5, label="order-2 guide")
        ax.legend()
    ax.set_xlabel("step / sample spacing")
    ax.set_ylabel("error")
    _save(fig, png_path)


_RENDERERS = {
    "skg-run": render_skg_run,
    "free-compare": render_free_compare,
    "semiclassical-scan": render_semiclassical_scan,
    "fock-verify": render_fock_verify,
    "theorem2-scaling": render_theorem2_scaling,
    "convergence-study": render_convergence_study,
}


def render_for(experiment: str, csv_path) -> str:
    """Render the experiment's figure next to its table; returns PNG path."""
    png_path = str(Path(csv_path).with_suffix(".png"))
    _RENDERERS[experiment](csv_path, png_path)
    return png_path
