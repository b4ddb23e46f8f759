"""Experiment configuration: schema, strict validation, serialization.

A run is reproducible from (config, seed) alone, so everything an
experiment consumes lives here. Unknown keys are rejected at every level
of the document; silent typos in physics configs are worse than noisy
failures.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import yaml

from .errors import ConfigError
from .grids import get_grid, get_modes
from .params import ModelParams

EXPERIMENTS = (
    "skg-run",
    "free-compare",
    "semiclassical-scan",
    "fock-verify",
    "theorem2-scaling",
    "convergence-study",
)

_MAX_SEED = 2**64 - 1


def _require_keys(mapping: dict, allowed: set, required: set, where: str) -> None:
    unknown = set(mapping) - allowed
    if unknown:
        raise ConfigError(f"unknown keys in {where}: {sorted(unknown)}")
    missing = required - set(mapping)
    if missing:
        raise ConfigError(f"missing keys in {where}: {sorted(missing)}")


@dataclass(frozen=True)
class OrbitalSpec:
    kind: str = "fermi-ball"  # fermi-ball | file
    path: Optional[str] = None

    @staticmethod
    def from_obj(obj, where: str) -> "OrbitalSpec":
        if obj is None or obj == "fermi-ball":
            return OrbitalSpec()
        if isinstance(obj, dict):
            _require_keys(obj, {"file"}, {"file"}, where)
            return OrbitalSpec(kind="file", path=str(obj["file"]))
        raise ConfigError(f"{where} must be 'fermi-ball' or {{file: path}}")

    def to_obj(self):
        if self.kind == "fermi-ball":
            return "fermi-ball"
        return {"file": self.path}


@dataclass(frozen=True)
class AlphaSpec:
    kind: str = "zero"  # zero | single-mode | file
    coords: tuple = ()
    amplitude: float = 0.0
    phase: float = 0.0
    path: Optional[str] = None

    @staticmethod
    def from_obj(obj, where: str) -> "AlphaSpec":
        if obj is None or obj == "zero":
            return AlphaSpec()
        if not isinstance(obj, dict):
            raise ConfigError(f"{where} must be 'zero' or a mapping")
        kind = obj.get("kind")
        if kind == "zero":
            _require_keys(obj, {"kind"}, {"kind"}, where)
            return AlphaSpec()
        if kind == "single-mode":
            _require_keys(
                obj, {"kind", "coords", "amplitude", "phase"},
                {"kind", "coords", "amplitude"}, where,
            )
            coords = tuple(int(c) for c in obj["coords"])
            return AlphaSpec(
                kind="single-mode",
                coords=coords,
                amplitude=float(obj["amplitude"]),
                phase=float(obj.get("phase", 0.0)),
            )
        if kind == "file":
            _require_keys(obj, {"kind", "path"}, {"kind", "path"}, where)
            return AlphaSpec(kind="file", path=str(obj["path"]))
        raise ConfigError(f"{where}.kind must be zero, single-mode or file")

    def to_obj(self):
        if self.kind == "zero":
            return "zero"
        if self.kind == "single-mode":
            return {
                "kind": "single-mode",
                "coords": list(self.coords),
                "amplitude": self.amplitude,
                "phase": self.phase,
            }
        return {"kind": "file", "path": self.path}


_OPTION_SCHEMAS = {
    "skg-run": set(),
    "free-compare": set(),
    "semiclassical-scan": {"k_list"},
    "fock-verify": {"method", "budget", "truncation_threshold"},
    "theorem2-scaling": {"delta_list"},
    "convergence-study": {"dt_list", "fock"},
}

_FOCK_STUDY_KEYS = {
    "grid_points",
    "cutoff",
    "n_max",
    "h_list",
    "amplitude",
    "coords",
    "phase",
}


def _validate_options(experiment: str, options: dict) -> dict:
    allowed = _OPTION_SCHEMAS[experiment]
    _require_keys(options, allowed, set(), f"options for {experiment}")
    out = dict(options)
    if experiment == "semiclassical-scan":
        k_list = out.setdefault("k_list", [])
        if not isinstance(k_list, list):
            raise ConfigError("k_list must be a list of integer coordinate lists")
        out["k_list"] = [tuple(int(c) for c in np.atleast_1d(k)) for k in k_list]
    if experiment == "fock-verify":
        method = out.setdefault("method", "auto")
        if method not in ("auto", "dense", "krylov"):
            raise ConfigError("fock-verify method must be auto, dense or krylov")
        out["budget"] = int(out.get("budget", 200_000))
        out["truncation_threshold"] = float(out.get("truncation_threshold", 1e-6))
        if out["budget"] <= 0:
            raise ConfigError("budget must be positive")
    if experiment == "theorem2-scaling":
        if "delta_list" not in out:
            raise ConfigError("theorem2-scaling needs delta_list")
        deltas = [float(x) for x in out["delta_list"]]
        if len(deltas) < 3:
            raise ConfigError("delta_list needs at least three values")
        if any(d < 0 for d in deltas):
            raise ConfigError("delta_list values must be nonnegative")
        if any(b >= a for a, b in zip(deltas, deltas[1:])):
            raise ConfigError("delta_list must be strictly decreasing")
        out["delta_list"] = deltas
    if experiment == "convergence-study":
        if "dt_list" not in out:
            raise ConfigError("convergence-study needs dt_list")
        dts = [float(x) for x in out["dt_list"]]
        if len(dts) < 4:
            raise ConfigError("dt_list needs at least four values")
        for a, b in zip(dts, dts[1:]):
            if abs(b - a / 2.0) > 1e-12 * a:
                raise ConfigError("dt_list values must halve at each step")
        out["dt_list"] = dts
        fock = out.get("fock")
        if fock is not None:
            _require_keys(
                fock, _FOCK_STUDY_KEYS,
                {"grid_points", "cutoff", "n_max", "h_list", "amplitude", "coords"},
                "options.fock",
            )
            fock = dict(fock)
            fock["h_list"] = [float(h) for h in fock["h_list"]]
            if len(fock["h_list"]) < 3:
                raise ConfigError("options.fock.h_list needs at least three values")
            fock["coords"] = tuple(int(c) for c in fock["coords"])
            fock.setdefault("phase", 0.0)
            out["fock"] = fock
    return out


@dataclass(frozen=True)
class ExperimentConfig:
    experiment: str
    params: ModelParams
    t_final: float = 1.0
    sample_interval: float = 0.1
    seed: int = 0
    output_dir: Optional[str] = None
    emit_binary: bool = False
    orbitals: OrbitalSpec = field(default_factory=OrbitalSpec)
    alpha: AlphaSpec = field(default_factory=AlphaSpec)
    options: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {self.experiment!r}; "
                f"choose from {', '.join(EXPERIMENTS)}"
            )
        if self.t_final <= 0:
            raise ConfigError("t_final must be positive")
        if self.sample_interval <= 0:
            raise ConfigError("sample_interval must be positive")
        if not 0 <= self.seed <= _MAX_SEED:
            raise ConfigError("seed must fit in an unsigned 64-bit integer")
        # Drivers index options without guards, so normalize here and not
        # only on the file-loading path (direct construction is public API).
        object.__setattr__(
            self, "options", _validate_options(self.experiment, dict(self.options))
        )

    def resolved_output_dir(self) -> str:
        if self.output_dir is not None:
            return self.output_dir
        return f"runs/{self.experiment}"

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "params": self.params.to_dict(),
            "t_final": self.t_final,
            "sample_interval": self.sample_interval,
            "seed": self.seed,
            "output_dir": self.output_dir,
            "emit_binary": self.emit_binary,
            "initial": {
                "orbitals": self.orbitals.to_obj(),
                "alpha": self.alpha.to_obj(),
            },
            "options": _options_to_obj(self.options),
        }

    @staticmethod
    def from_dict(data: dict) -> "ExperimentConfig":
        _require_keys(
            data,
            {
                "experiment",
                "params",
                "t_final",
                "sample_interval",
                "seed",
                "output_dir",
                "emit_binary",
                "initial",
                "options",
            },
            {"experiment", "params"},
            "config",
        )
        experiment = str(data["experiment"])
        if experiment not in EXPERIMENTS:
            raise ConfigError(
                f"unknown experiment {experiment!r}; "
                f"choose from {', '.join(EXPERIMENTS)}"
            )
        initial = data.get("initial") or {}
        _require_keys(initial, {"orbitals", "alpha"}, set(), "initial")
        options = dict(data.get("options") or {})
        return ExperimentConfig(
            experiment=experiment,
            params=ModelParams.from_dict(data["params"]),
            t_final=float(data.get("t_final", 1.0)),
            sample_interval=float(data.get("sample_interval", 0.1)),
            seed=int(data.get("seed", 0)),
            output_dir=(
                None if data.get("output_dir") is None else str(data["output_dir"])
            ),
            emit_binary=bool(data.get("emit_binary", False)),
            orbitals=OrbitalSpec.from_obj(initial.get("orbitals"), "initial.orbitals"),
            alpha=AlphaSpec.from_obj(initial.get("alpha"), "initial.alpha"),
            options=options,
        )


def _options_to_obj(options: dict):
    out = {}
    for key, value in options.items():
        if key == "k_list":
            out[key] = [list(k) for k in value]
        elif key == "fock":
            fock = dict(value)
            fock["coords"] = list(fock["coords"])
            out[key] = fock
        else:
            out[key] = value
    return out


def load_config(path) -> ExperimentConfig:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            data = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {path} is not valid YAML: {exc}") from exc
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} is not a mapping")
    return ExperimentConfig.from_dict(data)


def save_config(config: ExperimentConfig, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        yaml.safe_dump(config.to_dict(), fh, sort_keys=False)


def config_hash(config: ExperimentConfig) -> str:
    canonical = json.dumps(config.to_dict(), sort_keys=True)
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def build_initial_orbitals(config: ExperimentConfig, params: ModelParams) -> np.ndarray:
    from .skg import build_fermi_ball, gram_deviation

    grid = get_grid(params)
    if config.orbitals.kind == "fermi-ball":
        return build_fermi_ball(params)
    raw = np.load(config.orbitals.path)
    expected = (params.n_fermions,) + grid.shape
    if raw.shape != expected:
        raise ConfigError(
            f"orbital file shape {raw.shape} does not match {expected}"
        )
    orbitals = np.ascontiguousarray(raw, dtype=complex)
    if gram_deviation(orbitals, params) > 1e-8:
        raise ConfigError("orbital file is not orthonormal on this grid")
    return orbitals


def build_initial_alpha(config: ExperimentConfig, params: ModelParams) -> np.ndarray:
    modes = get_modes(params)
    if config.alpha.kind == "zero":
        return np.zeros(modes.count, dtype=complex)
    if config.alpha.kind == "single-mode":
        alpha = np.zeros(modes.count, dtype=complex)
        position = modes.mode_position(config.alpha.coords)
        alpha[position] = config.alpha.amplitude * np.exp(1j * config.alpha.phase)
        return alpha
    raw = np.load(config.alpha.path)
    if raw.shape != (modes.count,):
        raise ConfigError(
            f"alpha file shape {raw.shape} does not match ({modes.count},)"
        )
    return np.ascontiguousarray(raw, dtype=complex)
