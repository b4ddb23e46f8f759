"""Mean-field dynamics of fermions coupled to a quantized scalar field.

The package has three layers:

* an effective-equation solver (`skg`) integrating the coupled
  orbital/field system with a unitary splitting scheme, plus trace-norm
  diagnostics of the associated Slater projectors (`semiclassics`);
* an exact reference on a truncated many-body space (`fock_basis`,
  `fock_hamiltonian`, `fock_states`, `krylov`, `fock_observables`)
  measuring how far the true evolution strays from the product ansatz;
* configuration-driven experiment drivers and a CLI (`config`,
  `experiments`, `cli`) that emit delimited tables, figures and run
  manifests.
"""

from .config import ExperimentConfig, load_config, save_config
from .errors import (
    BudgetError,
    ConfigError,
    NumericalError,
    TruncationError,
    UnstableStepError,
)
from .experiments import RunResult, run_experiment
from .fock_basis import ManyBodyState, get_basis
from .fock_observables import BetaReport, beta_report, reduced_densities
from .fock_states import prepare_slater_coherent
from .krylov import propagate
from .params import ModelParams
from .semiclassics import SlaterProjector, projector_trace_distance
from .skg import SkgState, build_fermi_ball, solve_free, solve_skg

__version__ = "0.1.0"

__all__ = [
    "BetaReport",
    "BudgetError",
    "ConfigError",
    "ExperimentConfig",
    "ManyBodyState",
    "ModelParams",
    "NumericalError",
    "RunResult",
    "SkgState",
    "SlaterProjector",
    "TruncationError",
    "UnstableStepError",
    "beta_report",
    "build_fermi_ball",
    "get_basis",
    "load_config",
    "prepare_slater_coherent",
    "projector_trace_distance",
    "propagate",
    "reduced_densities",
    "run_experiment",
    "save_config",
    "solve_free",
    "solve_skg",
    "__version__",
]
