"""Recursive Haar pyramid with unnormalized averages and half-differences.

One level maps pairs ``(a, b)`` to the average ``(a + b) / 2`` and the detail
``(a - b) / 2``.  Because nothing is rescaled, the energy identity carries
explicit weights::

    sum_l 2**l * ||z_l||^2 + 2**L * y_L**2 == ||x||^2

In ``d`` dimensions each level splits ``2 x ... x 2`` cells with the tensor
filters built from ``[1, 1]`` and ``[1, -1]``.  Orientation ``i`` is a bit
tuple; ``i[k] == 1`` applies ``[1, -1]`` along axis ``k`` where axis 1 is the
within-row (last numpy) axis.  Orientations are stored in lexicographic order.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .errors import InvalidArgument, UnsupportedLength
from .operators import diff_nd


def _log2_exact(n: int) -> int:
    if n < 2 or n & (n - 1):
        raise UnsupportedLength(f"length {n} is not a power of two >= 2")
    return n.bit_length() - 1


@dataclass(frozen=True, eq=False)
class HaarPyramid:
    levels: tuple[np.ndarray, ...]
    coarse: float
    n: int

    @property
    def depth(self) -> int:
        return len(self.levels)

    def energy(self) -> float:
        e = sum(2.0 ** (l + 1) * float(z @ z) for l, z in enumerate(self.levels))
        return e + 2.0 ** self.depth * self.coarse ** 2


def haar_decompose_1d(x) -> HaarPyramid:
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument("expected a 1-D signal")
    L = _log2_exact(x.size)
    y = x
    levels = []
    for _ in range(L):
        a, b = y[0::2], y[1::2]
        levels.append((a - b) / 2.0)
        y = (a + b) / 2.0
    return HaarPyramid(tuple(levels), float(y[0]), x.size)


def haar_reconstruct_1d(p: HaarPyramid) -> np.ndarray:
    y = np.array([p.coarse])
    for z in reversed(p.levels):
        if z.size != y.size:
            raise InvalidArgument("inconsistent pyramid level sizes")
        out = np.empty(2 * y.size)
        out[0::2] = y + z
        out[1::2] = y - z
        y = out
    return y


def smooth_parts_1d(x) -> list[np.ndarray]:
    """Coarse sequences ``y_0 = x, y_1, ..., y_L`` (not upsampled)."""
    x = np.asarray(x, dtype=float)
    L = _log2_exact(x.size)
    out = [x]
    for _ in range(L):
        y = out[-1]
        out.append((y[0::2] + y[1::2]) / 2.0)
    return out


def upsample_1d(y, n: int) -> np.ndarray:
    """Piecewise-constant ``y ⊗ 1`` of total length ``n``."""
    y = np.asarray(y, dtype=float)
    return np.repeat(y, n // y.size)


def detail_components_1d(p: HaarPyramid) -> list[np.ndarray]:
    """Full-length components ``z_l ⊗ [1..1, -1..-1]`` for each level, then the
    constant coarse part."""
    comps = []
    for l, z in enumerate(p.levels, start=1):
        half = 2 ** (l - 1)
        pattern = np.concatenate((np.ones(half), -np.ones(half)))
        comps.append(np.kron(z, pattern))
    comps.append(np.full(p.n, p.coarse))
    return comps


def coarse_path_tv(x) -> np.ndarray:
    """``TV`` of each level's piecewise-constant smooth part, level 0 first.

    Upsampling by repetition leaves the 1-D total variation unchanged, so the
    values are computed on the short coarse sequences.
    """
    return np.array([float(np.abs(np.diff(y)).sum()) for y in smooth_parts_1d(x)])


# ---------------------------------------------------------------------------
# d dimensions


def orientations(d: int) -> list[tuple[int, ...]]:
    return [i for i in itertools.product((0, 1), repeat=d) if any(i)]


def haar_filter(i: tuple[int, ...]) -> np.ndarray:
    """The ``2 x ... x 2`` tensor filter for orientation ``i`` in numpy axis order."""
    d = len(i)
    h = np.array(1.0)
    # orientation bit k refers to numpy axis d-1-k
    factors = [np.array([1.0, -1.0]) if i[d - 1 - ax] else np.array([1.0, 1.0])
               for ax in range(d)]
    for f in factors:
        h = np.multiply.outer(h, f)
    return h


@dataclass(frozen=True, eq=False)
class HaarPyramidND:
    levels: tuple[dict, ...]
    coarse: float
    side: int
    dims: int

    @property
    def depth(self) -> int:
        return len(self.levels)

    def energy(self) -> float:
        d = self.dims
        e = 0.0
        for l, lev in enumerate(self.levels, start=1):
            e += 2.0 ** (d * l) * sum(float((Z * Z).sum()) for Z in lev.values())
        return e + 2.0 ** (d * self.depth) * self.coarse ** 2


def _blocks(Y: np.ndarray) -> np.ndarray:
    """Reshape to ``(m, 2, m, 2, ...)`` then move the 2-axes to the back."""
    d = Y.ndim
    m = Y.shape[0] // 2
    R = Y.reshape(sum(((m, 2) for _ in range(d)), ()))
    return R.transpose(list(range(0, 2 * d, 2)) + list(range(1, 2 * d, 2)))


def haar_decompose_nd(X) -> HaarPyramidND:
    X = np.asarray(X, dtype=float)
    d = X.ndim
    if d < 2:
        raise InvalidArgument("haar_decompose_nd needs d >= 2")
    if len(set(X.shape)) != 1:
        raise InvalidArgument(f"all sides must be equal, got {X.shape}")
    L = _log2_exact(X.shape[0])
    orients = orientations(d)
    filters = {i: haar_filter(i) for i in orients}
    axes = tuple(range(d, 2 * d))
    Y = X
    levels = []
    for _ in range(L):
        B = _blocks(Y)
        lev = {i: np.tensordot(B, filters[i], axes=(axes, tuple(range(d)))) / 2 ** d
               for i in orients}
        levels.append(lev)
        Y = B.mean(axis=axes)
    return HaarPyramidND(tuple(levels), float(Y.ravel()[0]), X.shape[0], d)


def haar_reconstruct_nd(p: HaarPyramidND) -> np.ndarray:
    d = p.dims
    Y = np.full((1,) * d, p.coarse)
    for lev in reversed(p.levels):
        B = np.multiply.outer(Y, np.ones((2,) * d))
        for i, Z in lev.items():
            B = B + np.multiply.outer(Z, haar_filter(i))
        m = Y.shape[0]
        perm = [None] * (2 * d)
        for k in range(d):
            perm[2 * k] = k
            perm[2 * k + 1] = d + k
        Y = B.transpose(perm).reshape((2 * m,) * d)
    return Y


def smooth_parts_nd(X) -> list[np.ndarray]:
    X = np.asarray(X, dtype=float)
    d = X.ndim
    L = _log2_exact(X.shape[0])
    out = [X]
    for _ in range(L):
        out.append(_blocks(out[-1]).mean(axis=tuple(range(d, 2 * d))))
    return out


def upsample_nd(Y, side: int) -> np.ndarray:
    Y = np.asarray(Y, dtype=float)
    f = side // Y.shape[0]
    for ax in range(Y.ndim):
        Y = np.repeat(Y, f, axis=ax)
    return Y


def axis_tv(Y, axis: int) -> float:
    return float(np.abs(np.diff(Y, axis=axis)).sum())


def coarse_path_axis_tv(X) -> np.ndarray:
    """Array ``[level, numpy axis]`` of ``||D_axis Ŷ_level||_1`` on the full grid.

    Each difference of the level-``l`` coarse array is repeated across a face
    of ``2**(l*(d-1))`` cells in the upsampled array.
    """
    parts = smooth_parts_nd(X)
    d = np.asarray(X).ndim
    out = np.empty((len(parts), d))
    for l, Y in enumerate(parts):
        w = 2.0 ** (l * (d - 1))
        for ax in range(d):
            out[l, ax] = w * axis_tv(Y, ax) if Y.shape[0] > 1 else 0.0
    return out


def detail_tv_nd(X, level: int) -> float:
    """Part of ``||D Ŷ_{level-1}||_1`` on edges interior to the level-``level``
    parent cells, measured on the full grid."""
    parts = smooth_parts_nd(X)
    Y = parts[level - 1]
    d = Y.ndim
    w = 2.0 ** ((level - 1) * (d - 1))
    total = 0.0
    for ax in range(d):
        diffs = np.diff(Y, axis=ax)
        sl = [slice(None)] * d
        sl[ax] = slice(0, None, 2)
        total += np.abs(diffs[tuple(sl)]).sum()
    return float(w * total)


def detail_tv_1d(p: HaarPyramid, level: int) -> float:
    """Same quantity in one dimension: ``2 * ||z_level||_1``."""
    return 2.0 * float(np.abs(p.levels[level - 1]).sum())


def detail_components_nd(p: HaarPyramidND) -> list[np.ndarray]:
    """Full-size components ``Ẑ_(l,i)`` (level-major, orientations in order),
    followed by the constant coarse component."""
    d = p.dims
    comps = []
    for l, lev in enumerate(p.levels, start=1):
        for i, Z in lev.items():
            B = np.multiply.outer(Z, haar_filter(i))
            m = Z.shape[0]
            perm = []
            for k in range(d):
                perm += [k, d + k]
            comp = B.transpose(perm).reshape((2 * m,) * d)
            comps.append(upsample_nd(comp, p.side))
    comps.append(np.full((p.side,) * d, p.coarse))
    return comps


def tv_of(X) -> float:
    return float(np.abs(diff_nd(X)).sum())
