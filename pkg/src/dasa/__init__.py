"""Non-Hermitian two- and three-level Hamiltonians with one real and one
complex eigenvalue, and piecewise-constant gain/loss protocols built on them
for fast eigenstate population transfer."""

from dasa.exceptions import (
    ComparisonError,
    ConfigurationError,
    DASAError,
    ExceptionalPointError,
    InfeasibleError,
    InvalidParameterError,
    NoCrossingError,
    NoFeasiblePointError,
    RootSelectionError,
    SingularParameterError,
    UnsupportedRegimeError,
)
from dasa.hamiltonian import (
    Eigenstructure,
    GammaRootSet,
    HamiltonianMatrix,
    RootRecord,
    SitePotential,
    SplitReport,
    TwoLevelParams,
    build_hamiltonian_2,
    build_hamiltonian_3,
    classify_split,
    eigenstructure_general,
    eigenvalues_closed_form,
    eigenvectors_closed_form,
    gamma1_roots,
    overlap_index,
)
from dasa.dynamics import (
    ObservableSeries,
    PropagationConfig,
    Trajectory,
    basis_state,
    biorthogonal_coefficients,
    observables,
    propagate_constant,
    propagate_time_dependent,
)
from dasa.protocols import (
    CostReport,
    FidelityReport,
    LZConfig,
    Protocol,
    ProtocolSegment,
    build_dasa_2level,
    build_dasa_3level,
    cost_report,
    find_switch_time,
    lz_hamiltonian,
    lz_sweep,
    lz_transfer_probability,
    run_protocol,
)
from dasa.optimizer import (
    DASAParams,
    OptimizationResult,
    SearchSpace,
    evaluate_candidate,
    optimize,
)

__version__ = "0.1.0"
