"""Greedy block partial-minimization engine with convergence certificates.

The engine repeatedly replaces the block whose gradient norm is largest by
that block's exact partial minimizer. Problems supply the objective, the
per-block gradients, and the partial minimizer; the engine owns block
selection, stopping, the divergence guard, and the iterate trace.

Immediately after a step on block j the partial-minimization contract makes
that block's gradient vanish, so the engine carries an exact zero for it in
the selection state (the measured post-step residual is recorded separately
in the trace). The working full-gradient norm is the root sum of squares of
the current block gradient norms.
"""

import abc
import logging
import math
from dataclasses import dataclass, field

import numpy as np

from . import numerics

__all__ = [
    "BlockVector",
    "BlockProblem",
    "QuadraticBlockProblem",
    "IterateTrace",
    "ConvergenceBound",
    "NumericalOverflowError",
    "CONVERGED",
    "MAX_ITERS_REACHED",
    "DIVERGING",
    "select_block",
    "step",
    "run",
    "theoretical_bound",
    "distance_bound_sq",
    "estimate_alpha_beta",
    "sample_convex_combinations",
    "midpoint_convexity_ok",
]

logger = logging.getLogger("slicescale")

CONVERGED = "converged"
MAX_ITERS_REACHED = "max_iters_reached"
DIVERGING = "diverging"


class NumericalOverflowError(ArithmeticError):
    """Objective or gradient became non-finite; carries the offending iterate."""

    def __init__(self, message, iterate=None, at_step=None):
        super().__init__(message)
        self.iterate = iterate
        self.at_step = at_step


class BlockVector:
    """A vector split into d blocks, treated as immutable.

    Operations return new instances; the underlying arrays are read-only.
    """

    __slots__ = ("blocks",)

    def __init__(self, blocks):
        out = []
        for b in blocks:
            b = np.array(b, dtype=float).ravel()
            b.setflags(write=False)
            out.append(b)
        if not out:
            raise ValueError("at least one block required")
        self.blocks = tuple(out)

    @classmethod
    def zeros(cls, dims):
        return cls([np.zeros(int(m)) for m in dims])

    @classmethod
    def from_concat(cls, dims, vec):
        vec = np.asarray(vec, dtype=float).ravel()
        if vec.size != sum(dims):
            raise ValueError("length does not match block dims")
        blocks, pos = [], 0
        for m in dims:
            blocks.append(vec[pos:pos + m])
            pos += m
        return cls(blocks)

    @property
    def dims(self):
        return tuple(b.size for b in self.blocks)

    @property
    def d(self):
        return len(self.blocks)

    def concat(self):
        return np.concatenate(self.blocks)

    def norm_inf(self):
        return max(float(np.abs(b).max()) if b.size else 0.0 for b in self.blocks)

    def with_block(self, j, new_block):
        new_block = np.asarray(new_block, dtype=float).ravel()
        if new_block.size != self.blocks[j].size:
            raise ValueError("replacement block has the wrong length")
        blocks = list(self.blocks)
        blocks[j] = new_block
        return BlockVector(blocks)

    def _binary(self, other, op):
        if self.dims != other.dims:
            raise ValueError("block dims mismatch")
        return BlockVector([op(a, b) for a, b in zip(self.blocks, other.blocks)])

    def __add__(self, other):
        return self._binary(other, np.add)

    def __sub__(self, other):
        return self._binary(other, np.subtract)

    def __mul__(self, scalar):
        s = float(scalar)
        return BlockVector([s * b for b in self.blocks])

    __rmul__ = __mul__

    def __repr__(self):
        return f"BlockVector(dims={self.dims})"


class BlockProblem(abc.ABC):
    """Contract for problems driven by the greedy engine.

    Subclasses must be strictly convex on their working space (checked only
    stochastically, see :func:`midpoint_convexity_ok`) and must implement the
    partial minimizer exactly: after replacing block j by its output, the
    block-j gradient norm must not exceed ``partial_min_tol``.
    """

    # Accuracy the partial minimizer is held to.
    partial_min_tol = 1e-12

    @property
    @abc.abstractmethod
    def block_dims(self):
        """Block lengths (m_1, ..., m_d) in working coordinates."""

    @property
    def d(self):
        return len(self.block_dims)

    @abc.abstractmethod
    def objective(self, x):
        """Objective value at ``x``."""

    @abc.abstractmethod
    def block_gradient(self, x, j):
        """Gradient with respect to block j, length block_dims[j]."""

    @abc.abstractmethod
    def partial_minimizer(self, x, j):
        """The block-j vector minimizing the objective with other blocks fixed."""

    def apply_update(self, x, j, new_block):
        """Produce the next iterate from a block-j update (default: replace block j)."""
        return x.with_block(j, new_block)

    def evaluate(self, x):
        """Objective and all block gradients at ``x`` (override to share work)."""
        return self.objective(x), [self.block_gradient(x, j) for j in range(self.d)]

    def objective_decrease(self, x_old, x_new, j):
        """Objective drop between consecutive stored iterates, or None.

        Near convergence the drop falls below the resolution of the objective
        itself, so problems that can evaluate it in a cancellation-free way
        (from the exact difference of the stored iterates) should override
        this; the engine records it in the trace.
        """
        return None

    def hessian(self, x):
        """Working-coordinate Hessian at ``x`` (needed for bound estimation)."""
        raise NotImplementedError("problem does not expose a Hessian")


class QuadraticBlockProblem(BlockProblem):
    """f(x) = 0.5 x^T A x + b^T x with A symmetric positive definite."""

    def __init__(self, matrix, linear, block_dims=None):
        A = np.asarray(matrix, dtype=float)
        b = np.asarray(linear, dtype=float).ravel()
        if A.ndim != 2 or A.shape[0] != A.shape[1] or A.shape[0] != b.size:
            raise ValueError("matrix/linear dimensions mismatch")
        if np.abs(A - A.T).max() > 1e-10 * max(1.0, np.abs(A).max()):
            raise ValueError("matrix must be symmetric")
        self.matrix = A
        self.linear = b
        dims = tuple(block_dims) if block_dims is not None else (1,) * b.size
        if sum(dims) != b.size:
            raise ValueError("block dims must sum to the dimension")
        self._dims = dims
        self._slices = []
        pos = 0
        for m in dims:
            self._slices.append(slice(pos, pos + m))
            pos += m

    @property
    def block_dims(self):
        return self._dims

    def objective(self, x):
        v = x.concat()
        return float(0.5 * v @ self.matrix @ v + self.linear @ v)

    def _gradient(self, x):
        return self.matrix @ x.concat() + self.linear

    def block_gradient(self, x, j):
        return self._gradient(x)[self._slices[j]]

    def evaluate(self, x):
        v = x.concat()
        g = self.matrix @ v + self.linear
        obj = float(0.5 * v @ self.matrix @ v + self.linear @ v)
        return obj, [g[s] for s in self._slices]

    def partial_minimizer(self, x, j):
        s = self._slices[j]
        v = x.concat()
        rhs = -self.linear[s] - self.matrix[s, :] @ v + self.matrix[s, s] @ v[s]
        if self._dims[j] == 1:
            return rhs / self.matrix[s, s].ravel()
        return numerics.solve_linear(self.matrix[s, s], rhs)

    def objective_decrease(self, x_old, x_new, j):
        # f(old) - f(new) = -(g^T delta + 0.5 delta^T A delta); the stored
        # iterate difference is exact, so this stays accurate far below the
        # resolution of the objective values themselves.
        delta = x_new.concat() - x_old.concat()
        g = self.matrix @ x_old.concat() + self.linear
        return float(-(g @ delta) - 0.5 * delta @ self.matrix @ delta)

    def hessian(self, x):
        return self.matrix


@dataclass
class IterateTrace:
    """Per-iteration record of a greedy run.

    State lists (objectives, block_grad_norms, full_grad_norms, iterates) have
    one entry per visited point, so length = number of steps + 1; the step
    lists (chosen_blocks, post_step_block_norms, objective_decreases) have one
    entry per step. ``block_grad_norms`` carries an exact zero for the block
    minimized in the previous step (the partial-minimization contract); the
    measured residual of that block is in ``post_step_block_norms``.
    ``objective_decreases`` holds the exact per-step objective drop when the
    problem can compute it stably, else the plain difference of objectives.
    """

    objectives: list = field(default_factory=list)
    full_grad_norms: list = field(default_factory=list)
    block_grad_norms: list = field(default_factory=list)
    chosen_blocks: list = field(default_factory=list)
    post_step_block_norms: list = field(default_factory=list)
    objective_decreases: list = field(default_factory=list)
    iterates: list = None

    @property
    def n_steps(self):
        return len(self.chosen_blocks)

    def gaps(self, reference=None):
        """Objective gaps t_k - reference (default: the final objective)."""
        ref = self.objectives[-1] if reference is None else reference
        return [t - ref for t in self.objectives]


@dataclass
class ConvergenceBound:
    """Geometric-rate certificate data for a greedy run.

    alpha and beta bound the working-space Hessian eigenvalues over the
    starting sublevel set; in practice they are sampled estimates.
    """

    d: int
    alpha: float
    beta: float
    grad0_norm: float

    @property
    def kappa(self):
        return self.beta / self.alpha

    @property
    def first_step_factor(self):
        return 1.0 - 1.0 / (self.d * self.kappa)

    @property
    def later_step_factor(self):
        return 1.0 - 1.0 / ((self.d - 1) * self.kappa)


def theoretical_bound(bound, k, f0_gap_bound=None, kappas=None):
    """Upper bound on the objective gap after k >= 1 greedy steps.

    The leading term is ||grad f(x_0)||^2 / (2 alpha), or ``f0_gap_bound``
    when a tighter initial-gap bound is known; it is contracted once by
    (1 - 1/(d kappa)) and then by (1 - 1/((d-1) kappa_i)) per later step.
    ``kappas`` optionally supplies per-step condition estimates for steps
    1..k-1 (defaults to the single starting kappa).
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    if bound.d < 2 or bound.alpha <= 0 or bound.kappa < 1:
        raise ValueError("invalid bound data")
    lead = bound.grad0_norm ** 2 / (2.0 * bound.alpha)
    if f0_gap_bound is not None:
        lead = min(lead, float(f0_gap_bound))
    value = lead * bound.first_step_factor
    for i in range(1, k):
        if kappas is not None:
            kap = float(kappas[i - 1])
            if kap < 1:
                raise ValueError("invalid bound data")
            value *= 1.0 - 1.0 / ((bound.d - 1) * kap)
        else:
            value *= bound.later_step_factor
    return value


def distance_bound_sq(bound, k, alpha_k=None, f0_gap_bound=None, kappas=None):
    """Upper bound on ||x_k - x*||^2: the objective-gap bound times 2/alpha(t_k)."""
    a = bound.alpha if alpha_k is None else float(alpha_k)
    if a <= 0:
        raise ValueError("invalid bound data")
    return theoretical_bound(bound, k, f0_gap_bound, kappas) * 2.0 / a


def estimate_alpha_beta(problem, points):
    """Extreme Hessian eigenvalues over sample points.

    Returns (alpha, beta) = (min of smallest, max of largest) eigenvalue over
    the samples. These are sample estimates of the sublevel-set extremes, not
    guaranteed bounds.
    """
    points = list(points)
    if not points:
        raise ValueError("points must be nonempty")
    alpha = math.inf
    beta = -math.inf
    for x in points:
        vals, _ = numerics.symmetric_eigs(problem.hessian(x))
        if vals[0] <= 0:
            raise ValueError("not strictly convex at sample")
        alpha = min(alpha, float(vals[0]))
        beta = max(beta, float(vals[-1]))
    return alpha, beta


def sample_convex_combinations(points, count, rng):
    """Random pairwise convex combinations of the given block vectors."""
    points = list(points)
    out = []
    for _ in range(count):
        i = int(rng.integers(len(points)))
        k = int(rng.integers(len(points)))
        lam = float(rng.uniform())
        out.append((1.0 - lam) * points[i] + lam * points[k])
    return out


def midpoint_convexity_ok(problem, center, rng, trials=16, radius=1.0):
    """Stochastic midpoint-convexity check around ``center``.

    Draws random pairs within ``radius`` of the center and verifies
    f((x+y)/2) <= (f(x)+f(y))/2 up to rounding slack. Returns bool.
    """
    dims = center.dims
    for _ in range(trials):
        dx = BlockVector([rng.uniform(-radius, radius, m) for m in dims])
        dy = BlockVector([rng.uniform(-radius, radius, m) for m in dims])
        x = center + dx
        y = center + dy
        fx, fy = problem.objective(x), problem.objective(y)
        fm = problem.objective(0.5 * (x + y))
        if fm > 0.5 * (fx + fy) + 1e-9 * (abs(fx) + abs(fy) + 1.0):
            return False
    return True


def _norms(grads):
    return [float(math.sqrt(float(g @ g))) for g in grads]


def _check_finite(obj, norms, x, at_step):
    if not math.isfinite(obj) or any(not math.isfinite(v) for v in norms):
        raise NumericalOverflowError(
            f"numerical overflow at step {at_step}", iterate=x, at_step=at_step
        )


def select_block(problem, x):
    """Index of a block with maximal gradient norm; ties go to the smallest index."""
    _, grads = problem.evaluate(x)
    return int(np.argmax(_norms(grads)))


def step(problem, x):
    """One greedy step: partially minimize the block with the largest gradient."""
    j = select_block(problem, x)
    new_block = problem.partial_minimizer(x, j)
    return problem.apply_update(x, j, new_block)


def run(problem, x0, tol, max_iters, divergence_guard=1e3, record_iterates=False):
    """Greedy block minimization from ``x0``.

    Stops with status ``converged`` when the working full-gradient norm drops
    to ``tol``, with ``diverging`` when the sup norm of the iterate exceeds
    ``divergence_guard`` (pass None to disable), and with
    ``max_iters_reached`` otherwise. Returns (x_final, trace, status).
    Non-finite objective or gradient values raise NumericalOverflowError.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    if max_iters < 1:
        raise ValueError("max_iters must be at least 1")
    guard = math.inf if divergence_guard is None else float(divergence_guard)
    x = x0
    obj, grads = problem.evaluate(x)
    norms = _norms(grads)
    _check_finite(obj, norms, x, 0)
    trace = IterateTrace(iterates=[] if record_iterates else None)
    status = MAX_ITERS_REACHED
    for k in range(max_iters + 1):
        full = math.sqrt(sum(v * v for v in norms))
        trace.objectives.append(obj)
        trace.block_grad_norms.append(list(norms))
        trace.full_grad_norms.append(full)
        if record_iterates:
            trace.iterates.append(x)
        if full <= tol:
            status = CONVERGED
            break
        if x.norm_inf() > guard:
            status = DIVERGING
            break
        if k == max_iters:
            status = MAX_ITERS_REACHED
            break
        j = int(np.argmax(norms))
        new_block = np.asarray(problem.partial_minimizer(x, j), dtype=float)
        x_old = x
        x = problem.apply_update(x, j, new_block)
        decrease = problem.objective_decrease(x_old, x, j)
        prev_obj = obj
        obj, grads = problem.evaluate(x)
        norms = _norms(grads)
        _check_finite(obj, norms, x, k + 1)
        trace.chosen_blocks.append(j)
        trace.post_step_block_norms.append(norms[j])
        trace.objective_decreases.append(
            prev_obj - obj if decrease is None else float(decrease)
        )
        if norms[j] > problem.partial_min_tol * max(1.0, abs(obj)):
            logger.warning(
                "partial minimizer missed its tolerance on block %d "
                "(residual %.2e)", j, norms[j]
            )
        norms[j] = 0.0  # exact partial minimization contract
        logger.debug(
            "step %d: block %d, objective %.17g, grad %.3e", k, j, obj, full
        )
    return x, trace, status
