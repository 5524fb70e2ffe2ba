"""Fidelity decay of Dirac particles in Landau levels under weak static perturbations."""

__version__ = "0.1.0"

from .dirac import HamiltonianModel, assemble, echo_kernel, echo_operator, evolve, propagator, toy_model
from .errors import (
    BoundaryFluxTooLarge,
    EmptyTruncation,
    FitFailure,
    GridMismatch,
    GridTooCoarse,
    GridTooSmall,
    MemoryCeiling,
    NumericalGuardError,
    RelechoError,
    StabilityViolation,
    TruncationTooLarge,
    ValidationError,
    WeightSumViolation,
)
from .fidelity import (
    FidelitySeries,
    continuity_residual,
    fidelity_current,
    fidelity_ensemble,
    fidelity_ode,
    fidelity_overlap,
)
from .fields import ConstantScalar, GaussianMagnetic, GaussianScalar, PerturbationField, Zero
from .grid import SpinorField, TransverseGrid
from .kg import KGGrid, KGPropagatorMatrix, KGState, kg_echo_kernel, kg_evolve, kg_fidelity, kg_inner
from .landau import (
    BasisTruncation,
    ParticleParams,
    QuantumNumbers,
    SampledBasis,
    degenerate_set,
    landau_energy,
    landau_orbital,
    landau_spinor,
)
from .perturbative import (
    BeamEnsemble,
    beam_c,
    boost_check,
    boost_velocity,
    c_coefficient,
    compton_guard,
    correlation_integral,
    correlation_quadrature,
    fit_decay,
    predicted_series,
)
