"""Run artifacts: delimited tables, binary trajectories, manifests.

Floats are written with repr-faithful precision ("%.17g") and a bare
newline terminator so that equal runs produce byte-identical files on any
platform. The manifest is written last via an atomic rename; a run that
died midway leaves data files but no manifest.
"""

from __future__ import annotations

import csv
import hashlib
import json
import os
import struct
from pathlib import Path

import numpy as np

from .config import ExperimentConfig, config_hash
from .errors import ConfigError
from .params import ModelParams
from .skg import SkgState

TRAJ_MAGIC = b"NMFTRAJ1"


def format_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "true" if value else "false"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return "%.17g" % float(value)
    return str(value)


def write_csv(path, header, rows) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        for row in rows:
            writer.writerow([format_cell(v) for v in row])


def save_trajectory(path, states: list[SkgState], params: ModelParams) -> None:
    """Compact binary trajectory: header + per-sample (time, orbitals, alpha).

    A JSON sidecar (path + ".json") documents the layout so the file is
    usable without this package.
    """
    if not states:
        raise ConfigError("cannot save an empty trajectory")
    n_orb = states[0].orbitals.shape[0]
    grid_shape = states[0].orbitals.shape[1:]
    n_alpha = states[0].alpha.shape[0]
    with open(path, "wb") as fh:
        fh.write(TRAJ_MAGIC)
        fh.write(
            struct.pack(
                "<IIII", len(states), n_orb, int(np.prod(grid_shape)), n_alpha
            )
        )
        fh.write(struct.pack("<I", len(grid_shape)))
        fh.write(struct.pack(f"<{len(grid_shape)}I", *grid_shape))
        for state in states:
            fh.write(struct.pack("<d", state.time))
            fh.write(np.ascontiguousarray(state.orbitals, dtype="<c16").tobytes())
            fh.write(np.ascontiguousarray(state.alpha, dtype="<c16").tobytes())
    sidecar = {
        "magic": TRAJ_MAGIC.decode("ascii"),
        "samples": len(states),
        "orbitals": [n_orb, list(grid_shape)],
        "alpha_modes": n_alpha,
        "record": "float64 time, complex128 orbitals (C order), complex128 alpha",
        "byte_order": "little-endian",
    }
    with open(str(path) + ".json", "w", encoding="utf-8") as fh:
        json.dump(sidecar, fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_trajectory(path) -> list[SkgState]:
    with open(path, "rb") as fh:
        magic = fh.read(len(TRAJ_MAGIC))
        if magic != TRAJ_MAGIC:
            raise ConfigError(f"{path} is not a trajectory file")
        n_samples, n_orb, grid_size, n_alpha = struct.unpack("<IIII", fh.read(16))
        (rank,) = struct.unpack("<I", fh.read(4))
        grid_shape = struct.unpack(f"<{rank}I", fh.read(4 * rank))
        if int(np.prod(grid_shape)) != grid_size:
            raise ConfigError(f"{path} has an inconsistent header")
        states = []
        for _ in range(n_samples):
            (time,) = struct.unpack("<d", fh.read(8))
            orbitals = np.frombuffer(
                fh.read(16 * n_orb * grid_size), dtype="<c16"
            ).reshape((n_orb,) + grid_shape)
            alpha = np.frombuffer(fh.read(16 * n_alpha), dtype="<c16")
            states.append(SkgState(orbitals.copy(), alpha.copy(), time))
    return states


def file_sha256(path) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            digest.update(chunk)
    return digest.hexdigest()


def write_manifest(
    out_dir,
    config: ExperimentConfig,
    emitted: list[str],
    started: float,
    finished: float,
) -> str:
    """Atomically write the run manifest; returns its path."""
    from . import __version__

    out_dir = Path(out_dir)
    manifest = {
        "config_hash": config_hash(config),
        "code_version": __version__,
        "experiment": config.experiment,
        "seed": config.seed,
        "started_unix": started,
        "finished_unix": finished,
        "files": {
            name: file_sha256(out_dir / name) for name in sorted(emitted)
        },
    }
    path = out_dir / "manifest.json"
    tmp = out_dir / "manifest.json.tmp"
    with open(tmp, "w", encoding="utf-8") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True)
        fh.write("\n")
    os.replace(tmp, path)
    return str(path)
