"""Error-resilient control of a three-level system through path-dependent global phases."""
from .ancillary_frame import (
    AncillaryBasis,
    GlobalPhases,
    PathSchedule,
    Ramp,
    Stage,
    ancillary_states,
    cyclic_schedule,
    exact_propagator,
    global_phases,
    phase_functions,
    transfer_schedule,
    von_neumann_residual,
)
from .error_analysis import (
    ErrorRotation,
    FidelityEstimate,
    correction_margin,
    dtilde_err,
    error_rotation,
    m_kernels_commutative,
    m_kernels_commutative_exact,
    magnus_fidelity,
    magnus_propagator,
)
from .errors import (
    ConfigError,
    ContractViolation,
    DimensionError,
    NumericalDomainError,
    QctlError,
    ScheduleDomainError,
    SingularScheduleError,
)
from .field_synthesis import (
    ErrorModel,
    FieldSet,
    assemble_h0,
    error_hamiltonian,
    synthesize_fields_general,
    synthesize_fields_lambda,
)
from .quantum_core import TimeGrid, matrix_exponential, propagate, propagator_accumulate, quadrature
from .scenarios import (
    CyclicSpec,
    SimulationResult,
    TransferSpec,
    cyclic_transfer,
    epsilon_sweep,
    populations,
    single_transfer,
)

__version__ = "0.1.0"
