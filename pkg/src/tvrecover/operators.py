"""Finite differences, TV norms, support restrictions and RelaxedNULL index sets.

Gradient fields are flat float arrays.  For a 1-D signal of length ``N`` the
field has ``N - 1`` entries, ``g[i] = x[i+1] - x[i]``.  For a d-dimensional
array the field is the concatenation of ``d`` blocks; block ``j`` holds the
differences along numpy axis ``d - 1 - j`` (so within-row differences come
first, then within-column, ...), each block raveled in row-major order.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sp

from .errors import InvalidArgument, SparsityTooLarge


def diff_1d(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1 or x.size < 2:
        raise InvalidArgument("diff_1d needs a 1-D signal with at least 2 samples")
    return x[1:] - x[:-1]


def diff_nd(X) -> np.ndarray:
    """Anisotropic finite differences of a d-dimensional array (axis-blocked)."""
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        return diff_1d(X)
    if min(X.shape) < 2:
        raise InvalidArgument("every side must have at least 2 samples")
    return np.concatenate([np.diff(X, axis=a).ravel() for a in reversed(range(X.ndim))])


def diff_adjoint(g, shape) -> np.ndarray:
    """Apply ``D^T`` to a gradient field laid out as :func:`diff_nd` produces."""
    shape = tuple(shape)
    g = np.asarray(g, dtype=float)
    if g.size != grad_size(shape):
        raise InvalidArgument(f"field of length {g.size} does not match shape {shape}")
    out = np.zeros(shape)
    offset = 0
    for a in reversed(range(len(shape))):
        bshape = list(shape)
        bshape[a] -= 1
        size = int(np.prod(bshape))
        block = g[offset:offset + size].reshape(bshape)
        offset += size
        lo = [slice(None)] * len(shape)
        hi = [slice(None)] * len(shape)
        lo[a] = slice(0, -1)
        hi[a] = slice(1, None)
        out[tuple(lo)] -= block
        out[tuple(hi)] += block
    return out


def grad_size(shape) -> int:
    shape = tuple(shape)
    total = int(np.prod(shape))
    return sum(total // s * (s - 1) for s in shape)


@lru_cache(maxsize=32)
def _diff_matrix_cached(shape: tuple) -> sp.csr_matrix:
    def d1(n):
        return sp.diags([-np.ones(n - 1), np.ones(n - 1)], [0, 1], shape=(n - 1, n))

    blocks = []
    for a in reversed(range(len(shape))):
        factors = [d1(s) if i == a else sp.identity(s) for i, s in enumerate(shape)]
        m = factors[0]
        for f in factors[1:]:
            m = sp.kron(m, f)
        blocks.append(m)
    return sp.vstack(blocks).tocsr()


def diff_matrix(shape) -> sp.csr_matrix:
    """Sparse matrix ``D`` acting on the row-major ravel of an array of ``shape``."""
    if isinstance(shape, (int, np.integer)):
        shape = (int(shape),)
    shape = tuple(int(s) for s in shape)
    if min(shape) < 2:
        raise InvalidArgument("every side must have at least 2 samples")
    return _diff_matrix_cached(shape)


def tv_norm(x) -> float:
    """Anisotropic total variation ``||Dx||_1``."""
    return float(np.abs(diff_nd(x)).sum())


def ksum_largest(g, k: int) -> float:
    """Sum of the ``k`` largest magnitudes of ``g``."""
    a = np.abs(np.asarray(g, dtype=float).ravel())
    if not 0 <= k <= a.size:
        raise InvalidArgument(f"k must lie in [0, {a.size}], got {k}")
    if k == 0:
        return 0.0
    if k == a.size:
        return float(a.sum())
    return float(np.partition(a, a.size - k)[a.size - k:].sum())


def top_k_indices(g, k: int) -> np.ndarray:
    """Indices of the ``k`` largest magnitudes, ties going to the lower index."""
    a = np.abs(np.asarray(g, dtype=float).ravel())
    order = np.lexsort((np.arange(a.size), -a))
    return np.sort(order[:k])


def _check_support(support, length: int) -> np.ndarray:
    idx = np.asarray(sorted(set(int(i) for i in support)), dtype=int)
    if idx.size and (idx[0] < 0 or idx[-1] >= length):
        raise InvalidArgument(f"support index out of range [0, {length})")
    return idx


def restrict(g, support) -> tuple[float, float]:
    """Split ``||g||_1`` into its on-support and off-support parts."""
    a = np.abs(np.asarray(g, dtype=float).ravel())
    idx = _check_support(support, a.size)
    mask = np.zeros(a.size, dtype=bool)
    mask[idx] = True
    return float(a[mask].sum()), float(a[~mask].sum())


@dataclass(frozen=True)
class RelaxedNullSets:
    dk: tuple[int, ...]
    kb: tuple[int, ...]


def relaxed_null_sets(n: int, support) -> RelaxedNullSets:
    """Signal indices touched by ``support`` and a disjoint set of differences.

    ``kb`` is chosen greedily from the left among differences whose two
    endpoints avoid ``dk`` and the endpoints of differences already chosen.
    """
    K = _check_support(support, n - 1)
    if n - 1 < 3 * K.size:
        raise SparsityTooLarge(f"need n - 1 >= 3|K|, got n={n}, |K|={K.size}")
    dk = sorted({int(i) for i in K} | {int(i) + 1 for i in K})
    used = set(dk)
    kb = []
    for i in range(n - 1):
        if i not in used and i + 1 not in used:
            kb.append(i)
            used.update((i, i + 1))
    return RelaxedNullSets(tuple(dk), tuple(kb))


def relaxed_null_margin(x, support) -> float:
    """``sum_{KB} |x[i+1]-x[i]| - 2 sum_{DK} |x[i]|``; positive means the relaxed
    sufficient inequality holds for this ``x``."""
    x = np.asarray(x, dtype=float)
    sets = relaxed_null_sets(x.size, support)
    kb = np.asarray(sets.kb, dtype=int)
    dk = np.asarray(sets.dk, dtype=int)
    jumps = np.abs(x[kb + 1] - x[kb]).sum() if kb.size else 0.0
    touched = np.abs(x[dk]).sum() if dk.size else 0.0
    return float(jumps - 2.0 * touched)


def power_norm(apply, apply_adjoint, n_in: int, iters: int = 200, seed: int = 0) -> float:
    """Operator 2-norm estimate by power iteration on ``A^T A``."""
    rng = np.random.default_rng(seed)
    v = rng.standard_normal(n_in)
    v /= np.linalg.norm(v)
    sigma = 0.0
    for _ in range(iters):
        w = apply_adjoint(apply(v))
        nw = np.linalg.norm(w)
        if nw == 0:
            return 0.0
        sigma = np.sqrt(nw)
        v = w / nw
    return float(sigma)
