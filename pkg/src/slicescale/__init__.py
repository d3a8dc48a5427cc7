"""Slice-sum scaling of nonnegative matrices and tensors.

Scales a nonnegative tensor entrywise by per-mode exponent vectors so that
every mode's slice sums hit prescribed positive targets, by greedily
partially minimizing a strictly convex mass objective one block at a time.
Includes geometric-rate certificates, an LP scalability test for patterned
tensors, and the reduction of discrete Schrodinger-bridge style matrix
problems to this scaling.
"""

from .blockmin import (BlockProblem, BlockVector, ConvergenceBound,
                       IterateTrace, NumericalOverflowError,
                       QuadraticBlockProblem, distance_bound_sq,
                       estimate_alpha_beta, run, select_block, step,
                       theoretical_bound)
from .bridge import BridgeProblem, BridgeResult, reduce_to_scaling, solve_bridge
from .feasibility import (FeasibilityReport, InfeasibleScalingError,
                          check_scalable, verify_witness)
from .numerics import (OrthonormalBasis, null_space, orthonormalize,
                       projector_onto, symmetric_eigs)
from .objective import ScalingPoint, ScalingProblem, SubspaceFrame, build_frame
from .scaler import (ScalingSolution, closed_form_block_update, normalize,
                     sinkhorn_reference, solve, solve_modified,
                     solve_positive_case)
from .tensor import (DenseTensor, ScalingOverflowError, SliceTargets,
                     ZeroPattern, check_compatibility, rank_one_target, scale,
                     slice_sums)

__version__ = "0.1.0"
