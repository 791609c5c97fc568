"""Non-Markovianity measures for open quantum evolutions.

Two quantifiers are provided: the divisibility measure ``I`` (and
``D_NM = I / (I + 1)``) computed from propagator families or Lindblad
generators, and the model-free witness ``I^(E)`` computed from a
system-ancilla entanglement trajectory, with an exact Gaussian simulation of
a damped oscillator in a discretized bosonic bath to produce such
trajectories.
"""

__version__ = "0.1.0"

from .divisibility import (
    NonMarkovReport,
    dephasing_oracle,
    f_ncp,
    g_from_family,
    g_from_generator,
    g_perturbative,
    measure_family,
    rhp_integral,
)
from .gaussian import (
    BathSpec,
    ComplexCovariance,
    ModeNetwork,
    SpectralDensity,
    discretize,
    entanglement_series,
    evolve,
    initial_covariance,
    log_negativity,
    reduce_and_quadrature,
)
from .lindblad import (
    LindbladGenerator,
    PropagatorFamily,
    dephasing_generator,
    evolve_state,
    generator_matrix,
    intermediate_map,
    propagate,
    read_propagator_table,
    write_propagator_table,
)
from .monitor import EntanglementSeries, i_entanglement
from .operator_core import (
    DensityMatrix,
    MaxEntangledState,
    Superoperator,
    choi_of,
    compose,
    invert,
    max_entangled,
    partial_transpose,
    trace_norm,
)
from .sweep import BathModel, sweep_i_entanglement
