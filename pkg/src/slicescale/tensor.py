"""Dense nonnegative multi-mode arrays with slice sums and exponent scaling."""

from dataclasses import dataclass

import numpy as np

__all__ = [
    "DenseTensor",
    "SliceTargets",
    "ZeroPattern",
    "ScalingOverflowError",
    "slice_sums",
    "scale",
    "check_compatibility",
    "rank_one_target",
]

# exp() overflows near 709 and positive entries underflow to zero near -745;
# exponents beyond this magnitude are rejected rather than clamped.
EXP_LIMIT = 700.0


class ScalingOverflowError(ArithmeticError):
    """A scaling exponent is too large in magnitude to evaluate safely."""


class DenseTensor:
    """Nonnegative dense array with at least two modes, each of size >= 2.

    Zero entries are exact 0.0 and define the support pattern. Tensors with an
    all-zero slice (all entries sharing one index in one mode equal to zero)
    are rejected at construction, since no rescaling can repair such a slice.
    """

    __slots__ = ("array",)

    def __init__(self, array):
        arr = np.array(array, dtype=float)
        if arr.ndim < 2:
            raise ValueError("tensor needs at least 2 modes")
        if any(m < 2 for m in arr.shape):
            raise ValueError("every mode needs size >= 2")
        if not np.all(np.isfinite(arr)):
            raise ValueError("entries must be finite")
        if np.any(arr < 0):
            raise ValueError("entries must be nonnegative")
        for k in range(arr.ndim):
            axes = tuple(a for a in range(arr.ndim) if a != k)
            if np.any(arr.sum(axis=axes) <= 0):
                raise ValueError(f"zero slice in mode {k}")
        arr.setflags(write=False)
        self.array = arr

    @classmethod
    def from_flat(cls, dims, values):
        """Build from a flat value list in row-major order (last index fastest)."""
        dims = tuple(int(m) for m in dims)
        values = np.asarray(values, dtype=float)
        if values.size != int(np.prod(dims)):
            raise ValueError("value count does not match dims")
        return cls(values.reshape(dims))

    @property
    def dims(self):
        return self.array.shape

    @property
    def d(self):
        return self.array.ndim

    @property
    def values(self):
        """Flat row-major view of the entries."""
        return self.array.reshape(-1)

    @property
    def total(self):
        return float(self.array.sum())

    @property
    def support(self):
        """Boolean mask, True where the entry is positive."""
        return self.array > 0

    def pattern(self):
        return ZeroPattern(self.dims, self.support)

    def same_pattern(self, other):
        return self.dims == other.dims and bool(np.all(self.support == other.support))

    def __repr__(self):
        return f"DenseTensor(dims={self.dims}, total={self.total:.6g})"


@dataclass(frozen=True)
class ZeroPattern:
    """Support mask of a tensor: True where the entry is strictly positive."""

    dims: tuple
    mask: np.ndarray

    def __eq__(self, other):
        return self.dims == other.dims and bool(np.all(self.mask == other.mask))


def check_compatibility(vectors, rtol=1e-10):
    """Common total of the target vectors; totals must agree to ``rtol``.

    Raises ValueError listing the totals if they disagree.
    """
    totals = [float(np.sum(np.asarray(v, dtype=float))) for v in vectors]
    if not totals:
        raise ValueError("no target vectors")
    ref = sum(totals) / len(totals)
    spread = max(totals) - min(totals)
    if spread > rtol * max(abs(ref), np.finfo(float).tiny):
        raise ValueError(f"incompatible slice-sum totals: {totals}")
    return ref


class SliceTargets:
    """Positive per-mode target vectors with a shared total mass."""

    __slots__ = ("vectors", "total")

    def __init__(self, vectors):
        vs = []
        for v in vectors:
            v = np.array(v, dtype=float)
            if v.ndim != 1 or v.size < 2:
                raise ValueError("each target vector needs length >= 2")
            if not np.all(np.isfinite(v)) or np.any(v <= 0):
                raise ValueError("target entries must be positive and finite")
            v.setflags(write=False)
            vs.append(v)
        if len(vs) < 2:
            raise ValueError("at least 2 target vectors are required")
        self.total = check_compatibility(vs)
        self.vectors = tuple(vs)

    @classmethod
    def uniform(cls, dims):
        """All-ones targets for every mode (compatible when all dims agree)."""
        return cls([np.ones(m) for m in dims])

    @property
    def dims(self):
        return tuple(v.size for v in self.vectors)

    @property
    def d(self):
        return len(self.vectors)

    def __repr__(self):
        return f"SliceTargets(dims={self.dims}, total={self.total:.6g})"


def slice_sums(t, mode):
    """Sums of entries over all indices except the given mode (0-based).

    Component i is the sum of every entry whose index in ``mode`` equals i;
    for a matrix these are the row sums (mode 0) and column sums (mode 1).
    """
    if not 0 <= mode < t.d:
        raise ValueError(f"mode {mode} out of range for {t.d}-mode tensor")
    axes = tuple(a for a in range(t.d) if a != mode)
    return t.array.sum(axis=axes)


def scale(t, x):
    """Entrywise rescaling by exp of per-mode exponent vectors.

    ``x`` provides one exponent vector per mode (a BlockVector or a sequence
    of arrays with lengths matching the dims); entry (i_1, ..., i_d) is
    multiplied by exp(x_1[i_1] + ... + x_d[i_d]). Zero entries stay exactly
    zero regardless of the exponent. Exponents above 700 in magnitude on the
    support raise ScalingOverflowError.
    """
    blocks = getattr(x, "blocks", x)
    if len(blocks) != t.d:
        raise ValueError("block count does not match tensor modes")
    expo = np.zeros(t.dims)
    for j, b in enumerate(blocks):
        b = np.asarray(b, dtype=float)
        if b.shape != (t.dims[j],):
            raise ValueError(f"block {j} has length {b.size}, expected {t.dims[j]}")
        shape = [1] * t.d
        shape[j] = t.dims[j]
        expo += b.reshape(shape)
    support = t.support
    sup_expo = expo[support]
    if sup_expo.size and float(np.abs(sup_expo).max()) > EXP_LIMIT:
        raise ScalingOverflowError("scaling overflow")
    out = np.zeros(t.dims)
    out[support] = t.array[support] * np.exp(sup_expo)
    return DenseTensor(out)


def rank_one_target(targets):
    """The positive tensor whose mode-k slice sums equal the targets exactly.

    Built as the outer product of the target vectors divided by total^(d-1).
    """
    out = np.asarray(targets.vectors[0], dtype=float)
    for v in targets.vectors[1:]:
        out = np.multiply.outer(out, v)
    out /= targets.total ** (targets.d - 1)
    return DenseTensor(out)
