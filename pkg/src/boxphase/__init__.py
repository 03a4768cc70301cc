"""Partial phase acquisition in a 2D box under a slowly swept zero-field source.

A spectral toolkit around one physical situation: an electron confined to a
hard-wall rectangle while a classical source of a curl-free vector potential
sweeps adiabatically across it.  Part of the wave function picks up the full
flux phase, the rest none, the energy never moves, and cycling the source
stacks the partial phase once per loop until a rational flux returns the
initial state.
"""

from .model import (BoxDomain, Mode, PhysicalConstants, SweepConfig,
                    coulomb_scalar_potential, eigenenergy, eigenfunction,
                    electric_field, phase_function, smooth_delta, smooth_step,
                    source_densities, vector_potential)
from .trajectory import (LoopConfig, breakpoint_times, loop_phase_function,
                         source_position, winding_number)
from .adiabatic import (AdiabaticState, adiabatic_amplitude, adiabaticity_ratio,
                        berry_phase_closed_form, nondiagonal_bound,
                        open_path_phase, predicted_phase_map)
from .propagator import (CouplingMatrix, ModeCoefficients, PropagationResult,
                         Truncation, coupling_matrix, default_dt, propagate,
                         render_to_grid, step)
from .analysis import (PhaseReport, RecurrenceReport, codegeneracy_residual,
                       energy_expectation, local_phase_map, overlap,
                       recurrence_check)
from .errors import (BoxPhaseError, ConfigError, ContractError,
                     InvalidParameterError, NumericFailureError, RegimeError)

__version__ = "0.1.0"
