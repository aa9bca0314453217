"""Reduced-rank adaptive filtering by joint iterative optimization.

A projection matrix (a bank of full-rank filters) and a short reduced-rank
filter are adapted together. The package provides the LMS recursions,
full-rank and Krylov-subspace baselines, batch MMSE designs, a DS-CDMA
received-signal simulator and a Monte Carlo harness.
"""

from .filters import (FullRankState, JioState, KrylovLmsState, StepOutput, detect_bpsk,
                      fullrank_lms_step, gradient_S, gradient_w, jio_lms_step, jio_output,
                      krylov_lms_step, krylov_projection)
from .numkernel import MomentSet, estimate_moments, hermitian_solve, orthonormalize_columns
from .oracle import (JointDesign, fullrank_mmse, joint_fixed_point, mmse_given_S, mse_given,
                     projection_mmse, reduced_w_mmse)

__version__ = "0.1.0"
