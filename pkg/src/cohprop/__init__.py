"""Coherent-state path integrals: P, Q and Weyl symbols, semiclassical propagators,
time-sliced fluctuation determinants and exact reference propagators, for a
bosonic mode and for spin."""

from .discrete import (
    DiscreteAction,
    DiscreteFluctuationReport,
    JacobiFieldsDiscrete,
    Scheme,
    SliceCoefficients,
    build_discrete_action,
    continuum_limit,
    det_tridiagonal,
    discrete_jacobi,
    discrete_report,
    fluctuation_matrix,
    gamma_sk,
    saddle_error_ratio,
    slice_coefficients,
    slice_recursion,
    solve_discrete_stationary,
    verify_identity,
    weyl_slice_saddle_check,
)
from .dynamics import (
    ClassicalTrajectory,
    Particle,
    ShootingOptions,
    Spin,
    TimeGrid,
    action,
    cross_derivative_of_action,
    integrate_ivp,
    riccati_Gud,
    solve_bvp_shooting,
)
from .errors import (
    AsymptoticRangeError,
    CausticError,
    CohPropError,
    ConfigError,
    ConvergenceError,
    DivergedTrajectoryError,
    IdentityViolation,
    RiccatiBlowupError,
    ZeroPivotError,
)
from .exact import FockMatrix, exact_propagator_particle, exact_propagator_spin
from .propagator import PropagatorResult, propagate_particle, propagate_spin, sk_integrand, sk_split, spin_symbol_for
from .spin import (
    SpinOperator,
    SpinQuantum,
    SpinSymbol,
    apply_Lsq,
    coherent_state_vector,
    spin_convert,
    spin_matrices,
    spin_operator_from_terms,
    spin_q_symbol,
    spin_symbol_of_operator,
)
from .symbols import (
    NormalOrderedOperator,
    PhasePoint,
    Rep,
    SymbolPolynomial,
    convert_symbol,
    eval_symbol,
    eval_symbol_derivs,
    kerr_operator,
    moyal_square_leading,
    operator_from_symbol,
    symbol_of_operator,
    weyl_kernel_trace_oracle,
    weyl_symbol_of_square,
)

__version__ = "0.1.0"
