"""Experiment drivers behind the command-line interface.

Each driver consumes a validated ExperimentConfig, writes its tables and
figures into the output directory, and returns the emitted file names.
run_experiment wraps a driver with BLAS single-thread pinning (so results
are identical at any worker count) and writes the manifest last, after
everything else succeeded. Worker threads only ever fan out over
independent tasks and results are collected in submission order.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np
from threadpoolctl import threadpool_limits

from .config import (
    ExperimentConfig,
    build_initial_alpha,
    build_initial_orbitals,
)
from .errors import BudgetError, NumericalError
from .fock_basis import basis_dimension, get_basis
from .fock_observables import (
    beta_report,
    ehrenfest_check,
    hamiltonian_expectation,
    weyl_number_check,
)
from .fock_states import prepare_slater_coherent, save_state
from .grids import get_modes
from .krylov import DENSE_DIM_LIMIT, propagate
from .output import save_trajectory, write_csv, write_manifest
from .params import ModelParams
from .plots import render_for
from .semiclassics import projector_trace_distance, semiclassical_scan
from .skg import (
    SkgState,
    alpha_norm,
    ehrenfest_residual_effective,
    gram_deviation,
    solve_free,
    solve_skg,
)


@dataclass
class RunResult:
    out_dir: str
    files: list
    manifest: str


def parallel_map(fn, items, threads: int) -> list:
    """Apply fn over items, results in submission order."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def run_experiment(config: ExperimentConfig, threads: int = 1) -> RunResult:
    out_dir = Path(config.resolved_output_dir())
    out_dir.mkdir(parents=True, exist_ok=True)
    driver = _DRIVERS[config.experiment]
    started = time.time()
    # BLAS pinned to one thread: reductions inside the math libraries are
    # then order-fixed, which the byte-identical rerun contract requires.
    with threadpool_limits(limits=1):
        emitted = driver(config, out_dir, threads)
    finished = time.time()
    manifest = write_manifest(out_dir, config, emitted, started, finished)
    return RunResult(str(out_dir), emitted, manifest)


def _initial_state(config: ExperimentConfig, params: ModelParams) -> SkgState:
    orbitals = build_initial_orbitals(config, params)
    alpha = build_initial_alpha(config, params)
    return SkgState(orbitals, alpha, 0.0)


def _run_skg(config: ExperimentConfig, out_dir: Path, threads: int) -> list:
    params = config.params
    trajectory, reports = solve_skg(
        _initial_state(config, params),
        config.t_final,
        params,
        sample_interval=config.sample_interval,
    )
    header = [
        "time",
        "gram_deviation",
        "alpha_norm",
        "alpha_bound",
        "energy_drift",
        "secondorder_residual",
    ]
    rows = [
        (
            r.time,
            r.gram_deviation,
            r.alpha_norm,
            r.alpha_bound,
            r.energy_drift,
            r.secondorder_residual,
        )
        for r in reports
    ]
    csv_path = out_dir / "skg_run.csv"
    write_csv(csv_path, header, rows)
    emitted = ["skg_run.csv", Path(render_for(config.experiment, csv_path)).name]
    if config.emit_binary:
        save_trajectory(out_dir / "skg_run.traj", trajectory, params)
        emitted += ["skg_run.traj", "skg_run.traj.json"]
    return emitted


def _run_free_compare(config: ExperimentConfig, out_dir: Path, threads: int) -> list:
    params = config.params
    initial = _initial_state(config, params)
    coupled, _ = solve_skg(
        initial, config.t_final, params, sample_interval=config.sample_interval
    )
    free, _ = solve_free(
        initial, config.t_final, params, sample_interval=config.sample_interval
    )

    def row(pair):
        state_c, state_f = pair
        distance = projector_trace_distance(
            state_c.orbitals, state_f.orbitals, params
        ) / params.n_fermions
        return (
            state_c.time,
            distance,
            gram_deviation(state_c.orbitals, params),
            gram_deviation(state_f.orbitals, params),
        )

    rows = parallel_map(row, zip(coupled, free), threads)
    csv_path = out_dir / "free_compare.csv"
    write_csv(
        csv_path,
        ["time", "trace_distance", "gram_dev_coupled", "gram_dev_free"],
        rows,
    )
    emitted = ["free_compare.csv", Path(render_for(config.experiment, csv_path)).name]
    if config.emit_binary:
        save_trajectory(out_dir / "free_compare.traj", free, params)
        emitted += ["free_compare.traj", "free_compare.traj.json"]
    return emitted


def _run_semiclassical_scan(
    config: ExperimentConfig, out_dir: Path, threads: int
) -> list:
    params = config.params
    k_list = config.options["k_list"]
    trajectory, _ = solve_skg(
        _initial_state(config, params),
        config.t_final,
        params,
        sample_interval=config.sample_interval,
    )
    blocks = parallel_map(
        lambda state: semiclassical_scan([state], k_list, params),
        trajectory,
        threads,
    )
    header = (
        ["time"]
        + [f"k_{i + 1}" for i in range(params.dim)]
        + ["k_abs", "tn_peq", "tn_commutator", "tn_pgradq", "hs_peq"]
    )
    rows = []
    for block in blocks:
        for coords, scan_row in zip(k_list, block):
            rows.append(
                (scan_row.time,)
                + tuple(int(c) for c in coords)
                + (
                    scan_row.k_abs,
                    scan_row.tn_peq,
                    scan_row.tn_commutator,
                    scan_row.tn_pgradq,
                    scan_row.hs_peq,
                )
            )
    csv_path = out_dir / "semiclassical_scan.csv"
    write_csv(csv_path, header, rows)
    return [
        "semiclassical_scan.csv",
        Path(render_for(config.experiment, csv_path)).name,
    ]


def _run_fock_verify(config: ExperimentConfig, out_dir: Path, threads: int) -> list:
    params = config.params
    budget = config.options["budget"]
    dim = basis_dimension(params)
    if dim > budget:
        raise BudgetError(
            f"configured budget {budget} exceeded: basis dimension {dim}"
        )
    method = config.options["method"]
    threshold = config.options["truncation_threshold"]

    initial = _initial_state(config, params)
    skg_states, _ = solve_skg(
        initial, config.t_final, params, sample_interval=config.sample_interval
    )
    fock_state = prepare_slater_coherent(
        initial.orbitals, initial.alpha, params, truncation_threshold=threshold
    )
    norm0 = fock_state.norm()
    energy0 = hamiltonian_expectation(fock_state, params)

    rows = []
    for skg_state in skg_states:
        fock_state = propagate(fock_state, skg_state.time, params, method=method)
        report = beta_report(
            fock_state, skg_state.orbitals, skg_state.alpha, params
        )
        _, _, weyl_gap = weyl_number_check(fock_state, skg_state.alpha, params)
        rows.append(
            (
                report.time,
                report.beta_a1,
                report.beta_a2,
                report.beta_b,
                report.beta_total,
                report.tn_gamma_f,
                report.tn_gamma_b,
                report.margin_f_lower,
                report.margin_f_upper,
                report.margin_b,
                weyl_gap,
                fock_state.norm() - norm0,
                hamiltonian_expectation(fock_state, params) - energy0,
                fock_state.truncation_loss,
            )
        )
    header = [
        "time",
        "beta_a1",
        "beta_a2",
        "beta_b",
        "beta_total",
        "tn_gamma_f",
        "tn_gamma_b",
        "margin_f_lower",
        "margin_f_upper",
        "margin_b",
        "weyl_gap",
        "norm_drift",
        "energy_drift",
        "truncation_loss",
    ]
    csv_path = out_dir / "fock_verify.csv"
    write_csv(csv_path, header, rows)
    emitted = ["fock_verify.csv", Path(render_for(config.experiment, csv_path)).name]
    if config.emit_binary:
        save_state(out_dir / "fock_verify.state", fock_state)
        emitted.append("fock_verify.state")
    return emitted


def _run_theorem2_scaling(
    config: ExperimentConfig, out_dir: Path, threads: int
) -> list:
    base = config.params
    deltas = config.options["delta_list"]
    initial = _initial_state(config, base)

    def branch(delta: float):
        params = replace(base, field_scale=delta)
        coupled, _ = solve_skg(
            initial, config.t_final, params, sample_interval=config.sample_interval
        )
        free, _ = solve_free(
            initial, config.t_final, params, sample_interval=config.sample_interval
        )
        return [
            (
                delta,
                sc.time,
                projector_trace_distance(sc.orbitals, sf.orbitals, params)
                / params.n_fermions,
            )
            for sc, sf in zip(coupled, free)
        ]

    blocks = parallel_map(branch, deltas, threads)
    rows = [row for block in blocks for row in block]
    csv_path = out_dir / "theorem2_scaling.csv"
    write_csv(csv_path, ["delta", "time", "trace_distance"], rows)
    return [
        "theorem2_scaling.csv",
        Path(render_for(config.experiment, csv_path)).name,
    ]


def _solution_gap(a: SkgState, b: SkgState, params: ModelParams) -> float:
    from .grids import get_grid

    grid = get_grid(params)
    orbital_gap = float(
        np.sqrt(np.sum(np.abs(a.orbitals - b.orbitals) ** 2) * grid.dx_d)
    )
    return max(orbital_gap, alpha_norm(a.alpha - b.alpha, params))


def _ordered_rows(section: str, steps, errors) -> list:
    rows = []
    for i, (step, err) in enumerate(zip(steps, errors)):
        if i == 0:
            order = float("nan")
            flag = "ok"
        else:
            previous = errors[i - 1]
            order = (
                math.log2(previous / err) if err > 0 and previous > 0 else float("nan")
            )
            flag = "ok" if err <= previous else "non-monotone"
        rows.append((section, step, err, order, flag))
    return rows


def _run_convergence_study(
    config: ExperimentConfig, out_dir: Path, threads: int
) -> list:
    params = config.params
    dt_list = config.options["dt_list"]
    initial = _initial_state(config, params)

    def solve_at(dt: float):
        run_params = replace(params, time_step=dt)
        trajectory, _ = solve_skg(
            initial, config.t_final, run_params, sample_interval=config.t_final
        )
        return trajectory[-1]

    finals = parallel_map(solve_at, dt_list, threads)
    self_errors = [
        _solution_gap(finals[i], finals[i + 1], params)
        for i in range(len(finals) - 1)
    ]
    rows = _ordered_rows("skg_self", dt_list[:-1], self_errors)

    def residual_at(dt: float):
        run_params = replace(params, time_step=dt)
        trajectory, _ = solve_skg(
            initial, config.t_final, run_params, sample_interval=dt
        )
        return float(np.nanmax(ehrenfest_residual_effective(trajectory, run_params)))

    residuals = parallel_map(residual_at, dt_list, threads)
    rows += _ordered_rows("skg_secondorder", dt_list, residuals)

    fock = config.options.get("fock")
    if fock is not None:
        fock_params = replace(
            params,
            grid_points=fock["grid_points"],
            cutoff=fock["cutoff"],
            fock_n_max=fock["n_max"],
        )
        modes = get_modes(fock_params)
        alpha = np.zeros(modes.count, dtype=complex)
        alpha[modes.mode_position(fock["coords"])] = fock["amplitude"] * np.exp(
            1j * fock["phase"]
        )
        from .skg import build_fermi_ball

        prepared = prepare_slater_coherent(
            build_fermi_ball(fock_params), alpha, fock_params
        )

        def fock_residual(h: float):
            states = [prepared]
            for i in range(4):
                states.append(
                    propagate(states[-1], (i + 1) * h, fock_params, method="auto")
                )
            _, residual, _ = ehrenfest_check(states, fock_params)
            return float(np.max(residual))

        fock_errors = parallel_map(fock_residual, fock["h_list"], threads)
        rows += _ordered_rows("fock_ehrenfest", fock["h_list"], fock_errors)

        if basis_dimension(fock_params) <= DENSE_DIM_LIMIT:

            def krylov_gap(h: float):
                dense = propagate(prepared, h, fock_params, method="dense")
                krylov = propagate(prepared, h, fock_params, method="krylov")
                return float(np.max(np.abs(dense.amp - krylov.amp)))

            gaps = parallel_map(krylov_gap, fock["h_list"], threads)
            rows += [
                ("fock_krylov_gap", h, gap, float("nan"), "ok")
                for h, gap in zip(fock["h_list"], gaps)
            ]

    csv_path = out_dir / "convergence_study.csv"
    write_csv(csv_path, ["section", "dt", "error", "observed_order", "flag"], rows)
    emitted = [
        "convergence_study.csv",
        Path(render_for(config.experiment, csv_path)).name,
    ]

    # The time stepper must hold second order; the final (most asymptotic)
    # self-convergence order is the binding check. Data is already on disk
    # when this trips, so a failed run can still be inspected. Errors at
    # exactly zero (a flow the splitting reproduces without error) carry no
    # order information and pass.
    previous, last = self_errors[-2], self_errors[-1]
    if previous > 0.0 and last > 0.0:
        final_order = math.log2(previous / last)
        if not final_order >= 1.9:
            raise NumericalError(
                f"self-convergence order {final_order:.3f} fell below 1.9"
            )
    elif not (previous == 0.0 and last == 0.0):
        raise NumericalError(
            "self-convergence errors are not comparable: "
            f"{previous!r} then {last!r}"
        )
    return emitted


_DRIVERS = {
    "skg-run": _run_skg,
    "free-compare": _run_free_compare,
    "semiclassical-scan": _run_semiclassical_scan,
    "fock-verify": _run_fock_verify,
    "theorem2-scaling": _run_theorem2_scaling,
    "convergence-study": _run_convergence_study,
}
