"""Variable density sampling schemes for compressed sensing on Cartesian grids."""

from .density import (DensityGrid, K_value, bound_iid, bound_markov, bound_mixed,
                      deterministic_set, optimal_density, polynomial_density,
                      restrict_and_renormalize)
from .empirical import empirical_measure, tv_distance, vds_convergence_report
from .grid import GridDims
from .reconstruct import ReconstructionConfig, douglas_rachford, project_affine, psnr, soft_threshold
from .sampler_iid import draw_iid, draw_mixed
from .sampler_markov import (TransitionKernel, juditsky_certificate, metropolis_kernel,
                             mix_with_jumps, run_chain, spectral_gap, verify_cheeger_bound)
from .sampler_parametric import SpiralSpec, lines3d_scheme, radial_scheme, spiral_trajectory
from .sampler_tsp import (Trajectory, draw_points, estimate_bhh_constant, occupation_measure,
                          parametrize_constant_speed, regrid_nearest, sample_curve, solve_tsp,
                          target_to_initial_density, verify_limit_density)
from .schemes import SamplingScheme
from .transforms import AcquisitionModel, WaveletSpec, apply_A, apply_A_adjoint

__version__ = "0.1.0"
