"""Random block Jacobi operators: spectra, transfer matrices, Lyapunov
exponents, Zariski closure diagnostics, localization statistics, and exact
many-body cross-checks for the anisotropic spin chain."""

from .errors import ConfigError, ConventionError, NumericalFailure
from .model import (
    BlockJacobiMatrix,
    DisorderRealization,
    HatBlockMatrix,
    ModelParams,
    SingleSiteDistribution,
    TrivialDisorderWarning,
    anisotropy_block,
    assemble_block_jacobi,
    assemble_general,
    assemble_hat_form,
    interleave_permutation,
    params_from_config,
    random_instance,
    realization_rng,
    sample_disorder,
    write_dense_csv,
)
from .spectral import (
    DOSHistogram,
    IntervalUnion,
    SpectralData,
    almost_sure_spectrum_approx,
    check_gap,
    check_spectral_symmetry,
    dos_histogram,
    eigensolve,
    ensemble_spectra,
    floquet_symbol,
    periodic_spectrum,
)
from .transfer import (
    CharpolyReport,
    GreenEvaluator,
    MatrixSolution,
    TransferMatrix,
    charpoly_identity_check,
    compound_matrix,
    fundamental_solutions,
    green_block,
    propagate,
    transfer_matrix,
    wronskian,
)
from .lyapunov import (
    AlphaScanResult,
    BlockEnsemble,
    ExponentEstimate,
    LyapunovSpectrum,
    ThoulessReport,
    ZeroEnergyPrediction,
    anderson_lyapunov_2x2,
    critical_alpha_scan,
    lyapunov_index,
    lyapunov_spectrum,
    thouless_check,
    two_step_lyapunov,
    zero_energy_aux_exponent,
    zero_energy_closed_form,
    zero_energy_shift,
)
from .furstenberg import (
    CertificateReport,
    ClosureResult,
    LieAlgebraElement,
    Sp2Element,
    build_A0,
    build_M,
    canceled_generator,
    energy_sweep_rank,
    lie_closure_dimension,
    site_transfer,
    zero_energy_reducibility_certificate,
)
from .localization import (
    CorrelatorField,
    DecayFit,
    WegnerRecord,
    dynamical_sup_lower_bound,
    eigenfunction_correlator,
    ensemble_correlator,
    evolution_block_norm,
    fit_decay,
    wegner_probe,
)
from .xy_oracle import (
    FermionSet,
    HeisenbergReport,
    LRStat,
    ManyBodyOperator,
    QuadraticFormReport,
    build_hamiltonian,
    build_jordan_wigner,
    free_fermion_spectrum,
    lr_commutator_stats,
    site_operator,
    verify_free_fermion_spectrum,
    verify_heisenberg_identity,
    verify_quadratic_form,
)

__version__ = "0.1.0"
