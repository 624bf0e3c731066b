"""Interpolatory and H2-optimal model reduction of bilinear systems."""

__version__ = "0.1.0"

from .algorithms import ConvergenceReport, ReductionConfig, birka, initialize, reduce, tbirka
from .benchmarks import (
    SimulationResult,
    burgers_carleman,
    convection_diffusion_lpv,
    fokker_planck,
    heat2d,
    output_error,
    recover_lpv,
    simulate,
)
from .estimators import BIRKA, TBIRKA
from .h2 import (
    H2Result,
    convergent_scaling,
    h2_error,
    h2_norm_gramian,
    h2_norm_pole_residue,
    relative_h2_error,
    truncated_h2_norm,
)
from .interpolation import (
    InterpolationData,
    build_bases,
    check_h2_interpolation_conditions,
    check_truncated_conditions,
    check_wilson_kronecker_conditions,
    verify_volterra_interpolation,
    volterra_functional,
    weight,
)
from .io import load_model, save_model
from .linalg import solve_generalized_sylvester, solve_sylvester, spectral_abscissa
from .system import (
    BilinearSystem,
    ProjectionPair,
    SpectralForm,
    eval_kernel,
    eval_transfer_function,
    pole_residue_reconstruct,
    reduce_by_projection,
    residues,
    scale_system,
    spectral_form,
)
