"""Simulation and checking of obliquely reflected diffusions in piecewise smooth domains.

The core objects are a slow-clock controlled path (``simulate_controlled``),
its time change onto the physical clock (``time_change``), the reflected SDE
view (``simulate_sder``, ``controlled_to_sder``) and the cone conditions that
make the reflection well posed (``cone_report``).
"""

__version__ = "0.1.0"

from .cones import boundary_sweep, cone_report, decompose_direction
from .controlled import (BoundaryBehavior, ControlledPath, DiffusionCoefficients,
                         select_reflection_face, simulate_controlled, simulate_paths)
from .convergence import convergence_study
from .errors import *  # noqa: F401,F403
from .fixtures import DOMAINS
from .geometry import DomainSpec, FaceSpec, ReflectionSpec, local_boundary_data, sample_boundary
from .markov import StoppingRule, run_restart_test
from .resolvent import (TestFunction, estimate_v_grid, estimate_vh_constrained,
                        estimate_vh_controlled, viscosity_subsolution_check)
from .scenario import ScenarioConfig, load_scenario
from .sder import SderPath, controlled_to_patchwork, controlled_to_sder, simulate_sder
from .timechange import ConstrainedPath, check_natural, invert_clock, time_change
