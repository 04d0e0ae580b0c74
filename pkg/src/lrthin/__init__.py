"""Distribution compression with sub-Gaussian thinning.

Select small coresets whose empirical distribution tracks a large input
under kernel-based quality measures, with adaptive guarantees when the
kernel matrix or data matrix is approximately low-rank. The package
provides the thinning algorithms themselves, quality metrics and bound
evaluators, and three downstream harnesses: thinned softmax attention,
gradient reordering for SGD, and a compressed two-sample test.
"""

from .attention import (AttentionApproxResult, AttentionProblem,
                        attention_max_err, exact_attention, thinformer)
from .ctt import (CTTConfig, TestOutcome, coreset_mmd, ctt_test,
                  subsample_mmd_test, theorem_failure_probability)
from .data import Coreset, PointSet, ThinConfig, induced_prob_vectors
from .io import load_points, save_points
from .kernels import (AttentionKernel, DeepKernel, GaussianKernel,
                      LinearKernel, TabulatedKernel, deep_kernel_eval,
                      get_counters, kernel_eval, kernel_matrix,
                      median_heuristic_eta, reset_counters)
from .metrics import (BoundInputs, ctt_inflation_factor, eps_rank,
                      gaussian_eigenvalue_decay_bound, kms, kms_bound_rhs,
                      mmd, mmd_bound_rhs, mmd_squared, spectrum,
                      uniform_mmd2_expectation)
from .reorder import (SGDProblem, SGDResult, gradient_eps_threshold,
                      prefix_discrepancy, run_sgd, thinned_reorder)
from .rng import RandomStream
from .thinning import (compress_output_size, gs_compress, gs_halve, gs_thin,
                       kh_compress, kh_halve, kh_refine, kt_compress,
                       lkh_halve, rkh_thin, thin, thin_uniform)

__version__ = "0.1.0"
