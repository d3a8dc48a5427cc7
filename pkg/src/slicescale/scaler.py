"""End-to-end slice-sum scaling solvers built on the greedy block engine.

Positive tensors (no gauge directions) are solved directly on the product of
per-mode target hyperplanes; patterned tensors with gauge directions go
through the projected variant, which applies the same closed-form block
update and then projects each iterate back onto the reduced working space.
Either way a converged run yields slice sums proportional to the targets,
and a final normalization makes them exact.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import blockmin
from .blockmin import BlockProblem, BlockVector
from .objective import ScalingPoint, ScalingProblem
from .tensor import DenseTensor, slice_sums

__all__ = [
    "ScalingSolution",
    "closed_form_block_update",
    "solve",
    "solve_positive_case",
    "solve_modified",
    "normalize",
    "sinkhorn_reference",
    "random_reduced_point",
    "StandardScalingBlockProblem",
    "ProjectedScalingBlockProblem",
]

# Default iterate guard: exponent sums on the support stay at most
# d * guard, safely below the overflow threshold of scale().
GUARD_EXP_BUDGET = 560.0

# Per-mode proportionality estimates must agree to this relative spread
# before normalization is allowed.
PROPORTIONALITY_RTOL = 1e-6


def default_divergence_guard(d):
    return min(1e3, GUARD_EXP_BUDGET / d)


def closed_form_block_update(problem, x, j, scaled=None):
    """Exact minimizer of the objective over mode-j exponents.

    With the other blocks held fixed, the update is log(target) minus
    log(slice sums with block j removed), shifted along the all-ones vector
    so the result is orthogonal to the target. It is evaluated from the
    currently scaled tensor (subtracting the old block in log domain), which
    avoids overflowing intermediates. Returns the ambient block (length m_j).
    """
    t = problem.scaled(x) if scaled is None else scaled
    sigma = slice_sums(t, j)
    if np.any(sigma <= 0):
        raise ValueError("zero slice encountered")
    s = problem.targets.vectors[j]
    tilde = x.blocks[j] + np.log(s) - np.log(sigma)
    shift = float(s @ tilde) / float(s.sum())
    return tilde - shift


class _ScalingBlockProblemBase(BlockProblem):
    """Shared plumbing for engine-facing scaling problems.

    The engine state is a BlockVector of per-mode hyperplane coordinates
    (block j has length m_j - 1); ambient blocks are recovered through the
    frame's mode bases.
    """

    def __init__(self, problem):
        self.problem = problem
        self.frame = problem.frame
        self._dims = tuple(m - 1 for m in problem.tensor.dims)

    @property
    def block_dims(self):
        return self._dims

    def to_ambient(self, y):
        return self.frame.ambient_from_coords(y)

    def from_ambient(self, x):
        return self.frame.working_coords(x)

    def objective(self, y):
        return self.problem.objective(self.to_ambient(y))

    def partial_minimizer(self, y, j):
        x = self.to_ambient(y)
        update = closed_form_block_update(self.problem, x, j)
        return self.frame.mode_bases[j].T @ update

    def objective_decrease(self, y_old, y_new, j):
        # f(new) = sum_e B_e(old) * exp(sum_k delta_k[i_k]) over the support.
        # The coordinate difference of the stored iterates is exact, so the
        # per-entry exponent changes carry errors proportional to the step
        # itself and the expm1 form keeps the drop's sign reliable far below
        # the resolution of the objective values.
        scaled = self.problem.scaled(self.to_ambient(y_old))
        expo = np.zeros(scaled.dims)
        for k in range(self.d):
            delta = self.frame.mode_bases[k] @ (y_new.blocks[k] - y_old.blocks[k])
            shape = [1] * self.d
            shape[k] = scaled.dims[k]
            expo += delta.reshape(shape)
        support = scaled.support
        terms = scaled.array[support] * np.expm1(expo[support])
        return -math.fsum(terms)

    def hessian(self, y):
        raise NotImplementedError


class StandardScalingBlockProblem(_ScalingBlockProblemBase):
    """Engine problem for tensors without gauge directions."""

    def evaluate(self, y):
        x = self.to_ambient(y)
        scaled = self.problem.scaled(x)
        grads = [
            self.problem.restricted_gradient(x, j, scaled=scaled)
            for j in range(self.d)
        ]
        return scaled.total, grads

    def block_gradient(self, y, j):
        return self.problem.restricted_gradient(self.to_ambient(y), j)

    def hessian(self, y):
        x = self.to_ambient(y)
        return self.problem.hessian_restricted(x, self.frame.working_basis)


class ProjectedScalingBlockProblem(_ScalingBlockProblemBase):
    """Engine problem for patterned tensors with gauge directions.

    Gradients are taken along the projected mode bases and every block update
    is followed by a projection onto the reduced working space, so iterates
    never leave it.
    """

    def evaluate(self, y):
        x = self.to_ambient(y)
        scaled = self.problem.scaled(x)
        ghat = self.problem.ambient_gradient(x, scaled=scaled)
        grads = [
            self.frame.projected_mode_bases[j].T @ ghat for j in range(self.d)
        ]
        return scaled.total, grads

    def block_gradient(self, y, j):
        return self.problem.w_gradient(self.to_ambient(y), j)

    def apply_update(self, y, j, new_block):
        x = self.to_ambient(y).with_block(
            j, self.frame.mode_bases[j] @ np.asarray(new_block, dtype=float)
        )
        projected = self.frame.reduced_projector @ x.concat()
        return self.from_ambient(
            BlockVector(self.frame.split(projected))
        )

    def hessian(self, y):
        x = self.to_ambient(y)
        return self.problem.hessian_restricted(x, self.frame.reduced_basis)


@dataclass
class ScalingSolution:
    """Outcome of a scaling run.

    ``scaled`` is the normalized tensor (exact targets) and is None unless the
    run converged; ``proportionality`` is the factor relating the slice sums
    at the final point to the targets before normalization. ``residuals``
    holds the per-mode sup-norm target mismatch of the normalized tensor.
    """

    x_star: ScalingPoint
    scaled: DenseTensor
    proportionality: float
    trace: blockmin.IterateTrace
    status: str
    residuals: list
    method: str
    working_problem: BlockProblem


def normalize(problem, x):
    """Divide the rescaled tensor by its proportionality factor.

    The factor is total mass over target total. The componentwise ratios of
    slice sums to targets must agree to 1e-6 relative across all modes (which
    also forces the per-mode factor estimates to agree), otherwise the point
    has not converged and ValueError('not converged') is raised. Returns
    (tensor, factor, per-mode residuals).
    """
    raw = problem.scaled(x)
    ratios = np.concatenate([
        slice_sums(raw, k) / problem.targets.vectors[k]
        for k in range(problem.d)
    ])
    mean = float(ratios.mean())
    if float(ratios.max() - ratios.min()) > PROPORTIONALITY_RTOL * abs(mean):
        raise ValueError("not converged")
    factor = raw.total / problem.targets.total
    out = DenseTensor(raw.array / factor)
    residuals = [
        float(np.abs(slice_sums(out, k) - problem.targets.vectors[k]).max())
        for k in range(problem.d)
    ]
    return out, factor, residuals


def _coerce_start(frame, x0, working_problem):
    if x0 is None:
        return BlockVector.zeros(working_problem.block_dims)
    if x0.dims == frame.dims:
        ScalingPoint(frame, x0)  # each block must lie in its target hyperplane
        return working_problem.from_ambient(x0)
    if x0.dims == tuple(working_problem.block_dims):
        return x0
    raise ValueError("starting point dims match neither ambient nor working blocks")


def _finish(problem, working, y, trace, status, method):
    x = working.to_ambient(y)
    point = ScalingPoint(problem.frame, x)
    if status == blockmin.CONVERGED:
        scaled, factor, residuals = normalize(problem, x)
    else:
        scaled, factor, residuals = None, None, None
    return ScalingSolution(point, scaled, factor, trace, status, residuals,
                           method, working)


def solve_positive_case(problem, x0=None, tol=1e-10, max_iters=10000,
                        divergence_guard=None, record_iterates=True):
    """Greedy scaling on the product of target hyperplanes.

    Requires a trivial gauge space (always true for strictly positive
    tensors). ``x0`` may be None (zero start), an ambient block vector with
    each block orthogonal to its target, or working coordinates.
    """
    if problem.frame.gauge_dim != 0:
        raise ValueError("tensor has gauge directions; use solve_modified")
    working = StandardScalingBlockProblem(problem)
    y0 = _coerce_start(problem.frame, x0, working)
    guard = divergence_guard if divergence_guard is not None else default_divergence_guard(problem.d)
    y, trace, status = blockmin.run(working, y0, tol, max_iters, guard,
                                    record_iterates)
    return _finish(problem, working, y, trace, status, "greedy-standard")


def solve_modified(problem, x0=None, tol=1e-10, max_iters=10000,
                   divergence_guard=None, record_iterates=True):
    """Projected greedy scaling on the reduced working space.

    Requires a nontrivial gauge space; the start must lie in the reduced
    space (the zero default always does).
    """
    if problem.frame.gauge_dim == 0:
        raise ValueError("tensor has no gauge directions; use solve_positive_case")
    working = ProjectedScalingBlockProblem(problem)
    y0 = _coerce_start(problem.frame, x0, working)
    resid = problem.frame.reduced_residual(working.to_ambient(y0))
    if resid > 1e-10 * max(1.0, working.to_ambient(y0).norm_inf()):
        raise ValueError("starting point lies outside the reduced working space")
    guard = divergence_guard if divergence_guard is not None else default_divergence_guard(problem.d)
    y, trace, status = blockmin.run(working, y0, tol, max_iters, guard,
                                    record_iterates)
    return _finish(problem, working, y, trace, status, "greedy-projected")


def solve(problem, x0=None, tol=1e-10, max_iters=10000, divergence_guard=None,
          record_iterates=True):
    """Dispatch on the gauge dimension: standard path when it is zero,
    projected path otherwise."""
    if problem.frame.gauge_dim == 0:
        return solve_positive_case(problem, x0, tol, max_iters,
                                   divergence_guard, record_iterates)
    return solve_modified(problem, x0, tol, max_iters, divergence_guard,
                          record_iterates)


def random_reduced_point(frame, rng, radius=1.0):
    """Random ambient block vector in the reduced working space."""
    coeffs = rng.uniform(-radius, radius, frame.reduced_dim)
    vec = frame.reduced_basis @ coeffs
    return BlockVector(frame.split(vec))


def sinkhorn_reference(matrix, row_targets, col_targets, rounds):
    """Classical alternating row/column scaling, for test comparison only.

    Each round scales rows to hit ``row_targets`` exactly, then columns to
    hit ``col_targets`` exactly. Returns (final matrix, list of matrices
    after every half step).
    """
    M = np.array(matrix, dtype=float)
    r = np.asarray(row_targets, dtype=float)
    c = np.asarray(col_targets, dtype=float)
    iterates = []
    for _ in range(rounds):
        M = M * (r / M.sum(axis=1))[:, None]
        iterates.append(M.copy())
        M = M * (c / M.sum(axis=0))[None, :]
        iterates.append(M.copy())
    return M, iterates
