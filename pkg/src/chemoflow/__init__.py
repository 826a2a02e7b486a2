"""chemoflow: a finite-volume laboratory for a regularized degenerate
chemotaxis-Navier-Stokes system with logistic source.

Public surface re-exports the grid types, coefficient functions, stepping
routines, diagnostics, and the experiment harness.
"""

from .errors import (CflViolationError, ConfigError, InputDomainError,
                     NumericalFailureError, RunAbortedError, SetupError)
from .grid import (GridSpec, InitialData, ScalarField, State, VectorField,
                   divergence, gradient, integrate, laplacian_dirichlet,
                   laplacian_neumann)
from .regularization import (ModelParams, consumption_f, diffusivity,
                             sensitivity, yosida_smooth)
from .linsolve import poisson_solve
from .scalar_step import StepControls, cfl_dt, step_c, step_n
from .flow_step import step_u
from .diagnostics import (FunctionalRecord, MonitorVerdict, chain_rule_pair,
                          check_c_monotone, check_energy_boundedness,
                          check_gradc_budget, check_mass_bound, compute_record)
from .weakform import TestFunctionSpec, weak_residual
from .harness import (Scenario, SweepReport, barenblatt_test, build_initial,
                      default_scenario, eps_sweep, heat_mode_test, m_sweep,
                      refinement_study, run)

__version__ = "0.1.0"
