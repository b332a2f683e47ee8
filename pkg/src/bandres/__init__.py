"""Band structure, tunneling actions, and resonance widths for slowly
modulated one-dimensional periodic Schrodinger operators."""

from .actions import (
    ActionData,
    TunnelingCoefficients,
    actions_pm,
    compute_action_data,
    delta_kappa,
    phase_integral,
    phase_integral_derivative,
    tunneling_coefficients,
    well_phase,
    well_phase_derivative,
)
from .config import OracleSettings, RunConfiguration, load_configuration
from .errors import (
    BandresError,
    BoundaryCollisionError,
    ComputationError,
    ConfigurationError,
    CriticalEndpointError,
    DomainError,
    EnergyRangeError,
    IntegrationFailure,
    InternalConsistencyError,
    NearSingularityError,
    OracleError,
    RootCountError,
    SingularDerivativeError,
    UnsupportedConfigurationError,
)
from .hill import (
    BandStructure,
    MonodromyMatrix,
    PeriodicPotential,
    QuasiMomentum,
    band_edges,
    discriminant,
    edge_band_side,
    edge_reduced_value,
    integrate_monodromy,
    quasi_momentum_derivative,
    quasi_momentum_main,
    reduced_momentum,
)
from .momentum import (
    BranchPoint,
    BranchPointSet,
    MomentumSample,
    find_branch_points,
    im_kappa_gap,
    isoenergy_portrait,
    kappa_normalized,
)
from .oracle import (
    GridHamiltonian,
    HillEdgeResult,
    OracleConfig,
    OracleEigenpair,
    build_grid_hamiltonian,
    hill_matrix_band_edges,
    oracle_spectrum,
)
from .solver import (
    ResonanceEstimate,
    SolverConfig,
    drift_slope,
    locate_resonances,
    width_estimate,
)
from .window import (
    Bump,
    PerturbationProfile,
    SpectralWindow,
    WindowComponent,
    WindowEndpoint,
    classify_energy,
    decompose_window,
    evaluate_profile,
)

__version__ = "0.1.0"
