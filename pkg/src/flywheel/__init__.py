"""Voltage-driven quantum-dot nanomechanical oscillator simulator.

Computes the frozen-position electronic transport coefficients of a biased
resonant level with Lorentzian leads, integrates the resulting quasi-
adiabatic Langevin dynamics, reconstructs the oscillator's number-basis
state from its phase-space density, and quantifies the work stored in the
self-oscillating steady state across a voltage sweep.
"""

__version__ = "0.1.0"

from .errors import (ConfigError, ConsistencyError, DivergenceError, FlywheelError,
                     GridCoverageError, QuadratureError, TruncationError,
                     VacuumStateError)
from .params import DeviceParams, LeadSpec
from .electronic import (damping, diffusion, excess_occupation, fermi,
                         green_function, noise_spectrum, check_sum_rule,
                         self_energy, spectral_density, spectral_function)
from .tables import (CoefficientTable, build_table, find_negative_damping_interval,
                     lasing_threshold, lookup, negative_damping_present,
                     read_table_csv, write_table_csv)
from .langevin import (AdiabaticityReport, IntegratorConfig, Trajectory,
                       batched_variance, check_adiabaticity, dump_trajectory,
                       position_autocorrelation, run, step)
from .wigner import (GridSpec, RadialProfile, WignerGrid, auto_grid_spec,
                     estimate_wigner, grid_moments, mean_occupation_from_moments,
                     radial_profile, radial_profile_from_samples, read_profile_csv,
                     write_profile_csv, write_wigner_csv)
from .reconstruct import (DiagonalState, characteristic_from_radial,
                          coherent_ring_profile, diagonal_state_profile,
                          mean_occupation, populations_via_characteristic,
                          populations_via_overlap, read_populations_csv,
                          reconstruct_populations, thermal_profile,
                          vacuum_profile, weighted_laguerre,
                          write_populations_csv)
from .thermo import (ThermoReport, analyze, entropy, ergotropy, free_energy_work,
                     g2_zero, gibbs_state, mean_energy, write_summary_csv)
from .sweep import (RunConfig, SweepResult, ValidationReport, load_config,
                    reanalyze, run_sweep, run_voltage, validate_device,
                    voltage_seed)
