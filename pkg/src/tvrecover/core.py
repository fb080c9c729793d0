"""Seeded randomness, Gaussian ensembles, dense linear algebra and test signals.

Signals are plain ``numpy`` float arrays: 1-D arrays of length ``N >= 2`` for
one-dimensional signals, ``d``-dimensional arrays with equal sides for
multidimensional ones.  Every randomized routine takes a :class:`SeedSpec`
(or a bare integer, which is read as ``SeedSpec(seed, 0)``) and is a pure
function of it.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .errors import DegenerateEnsemble, InvalidArgument

_MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One step of the SplitMix64 output function."""
    z = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *indices: int) -> int:
    """Mix a master seed with a path of integer indices into a 64-bit seed.

    The result depends only on ``(master, indices)``, so work unit ``i`` of
    experiment ``e`` can be regenerated without replaying anything else.
    """
    s = splitmix64(int(master) & _MASK64)
    for idx in indices:
        if idx < 0:
            raise InvalidArgument(f"seed indices must be non-negative, got {idx}")
        s = splitmix64(s ^ splitmix64((int(idx) + 0x632BE59BD9B4E019) & _MASK64))
    return s


@dataclass(frozen=True)
class SeedSpec:
    master_seed: int
    stream_index: int = 0

    def __post_init__(self):
        if self.stream_index < 0:
            raise InvalidArgument("stream_index must be non-negative")

    @property
    def child_seed(self) -> int:
        return derive_seed(self.master_seed, self.stream_index)

    def rng(self) -> np.random.Generator:
        return np.random.Generator(np.random.PCG64(self.child_seed))

    def spawn(self, index: int) -> "SeedSpec":
        """Sub-stream keyed by ``index`` below this stream."""
        return SeedSpec(self.child_seed, index)


def as_seed(seed) -> SeedSpec:
    if isinstance(seed, SeedSpec):
        return seed
    if isinstance(seed, (int, np.integer)):
        return SeedSpec(int(seed) & _MASK64, 0)
    raise InvalidArgument(f"cannot interpret {seed!r} as a seed")


# ---------------------------------------------------------------------------
# signal validation


def check_signal(x) -> np.ndarray:
    """Validate a 1-D signal and return it as a float array."""
    x = np.asarray(x, dtype=float)
    if x.ndim != 1:
        raise InvalidArgument(f"expected a 1-D signal, got shape {x.shape}")
    if x.size < 2:
        raise InvalidArgument("a signal needs at least 2 samples")
    if not np.all(np.isfinite(x)):
        raise InvalidArgument("signal has non-finite entries")
    return x


def check_multisignal(X) -> np.ndarray:
    """Validate a d-dimensional signal (d >= 2, equal sides)."""
    X = np.asarray(X, dtype=float)
    if X.ndim < 2:
        raise InvalidArgument(f"expected d >= 2 dimensions, got shape {X.shape}")
    if len(set(X.shape)) != 1:
        raise InvalidArgument(f"all sides must be equal, got shape {X.shape}")
    if X.shape[0] < 2:
        raise InvalidArgument("side length must be at least 2")
    if not np.all(np.isfinite(X)):
        raise InvalidArgument("signal has non-finite entries")
    return X


# ---------------------------------------------------------------------------
# measurement ensembles


@dataclass(frozen=True, eq=False)
class MeasurementEnsemble:
    """An ``M x N`` measurement matrix together with the seed that made it.

    ``seed`` is ``None`` for matrices supplied directly by the caller.
    """

    matrix: np.ndarray
    seed: int | None = None

    def __post_init__(self):
        a = np.asarray(self.matrix, dtype=float)
        if a.ndim != 2:
            raise InvalidArgument(f"measurement matrix must be 2-D, got {a.shape}")
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def m_rows(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_cols(self) -> int:
        return self.matrix.shape[1]

    @classmethod
    def from_matrix(cls, matrix) -> "MeasurementEnsemble":
        return cls(np.atleast_2d(np.asarray(matrix, dtype=float)))


def as_ensemble(A) -> MeasurementEnsemble:
    if isinstance(A, MeasurementEnsemble):
        return A
    return MeasurementEnsemble(np.asarray(A, dtype=float))


@dataclass(frozen=True, eq=False)
class NullBasis:
    """Orthonormal basis (columns) of the null space of a measurement matrix."""

    basis: np.ndarray
    source_seed: int | None = None
    _projector: np.ndarray | None = field(default=None, repr=False)

    @property
    def n(self) -> int:
        return self.basis.shape[0]

    @property
    def dim(self) -> int:
        return self.basis.shape[1]

    def projector(self) -> np.ndarray:
        """Orthogonal projector ``H H^T`` onto the null space."""
        if self._projector is None:
            object.__setattr__(self, "_projector", self.basis @ self.basis.T)
        return self._projector


def gaussian_matrix(m: int, n: int, seed) -> MeasurementEnsemble:
    """Draw an ``m x n`` matrix with i.i.d. standard normal entries."""
    if m < 1 or n < 2:
        raise InvalidArgument(f"need m >= 1 and n >= 2, got m={m}, n={n}")
    spec = as_seed(seed)
    a = spec.rng().standard_normal((m, n))
    return MeasurementEnsemble(a, seed=spec.child_seed)


def null_space_basis(A) -> NullBasis:
    """Orthonormal null-space basis from a full QR factorization of ``A^T``.

    Raises :class:`DegenerateEnsemble` when ``rank(A) < M``.
    """
    ens = as_ensemble(A)
    a = ens.matrix
    m, n = a.shape
    if m == 0:
        return NullBasis(np.eye(n), ens.seed)
    if m > n:
        raise DegenerateEnsemble(f"more rows ({m}) than columns ({n}); rank(A) < M")
    q, r, _ = scipy.linalg.qr(a.T, mode="full", pivoting=True)
    diag = np.abs(np.diag(r))
    tol = max(m, n) * np.finfo(float).eps * (diag[0] if diag.size else 0.0)
    if diag.size == 0 or diag[-1] <= tol:
        raise DegenerateEnsemble("measurement matrix is rank deficient")
    basis = np.ascontiguousarray(q[:, m:])
    return NullBasis(basis, ens.seed)


def min_singular_value(A) -> float:
    """Smallest of the ``min(M, N)`` singular values (0 for an empty matrix)."""
    a = as_ensemble(A).matrix
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False).min())


# ---------------------------------------------------------------------------
# test signals


def sparse_gradient_signal(n: int, k: int, seed, amp_low: float = -10.0,
                           amp_high: float = 10.0) -> np.ndarray:
    """Piecewise-constant signal whose finite difference has exactly ``k`` nonzeros.

    Breakpoints are uniform without replacement among ``1..n-1``; piece levels
    are i.i.d. uniform on ``[amp_low, amp_high]`` and are redrawn whenever two
    neighbouring pieces land within ``1e-9`` of each other.
    """
    if n < 2:
        raise InvalidArgument("n must be at least 2")
    if not 0 <= k <= n - 1:
        raise InvalidArgument(f"k must lie in [0, n-1] = [0, {n - 1}], got {k}")
    if not amp_low < amp_high:
        raise InvalidArgument("amp_low must be below amp_high")
    rng = as_seed(seed).rng()
    breaks = np.sort(rng.choice(np.arange(1, n), size=k, replace=False))
    levels = rng.uniform(amp_low, amp_high, size=k + 1)
    while True:
        bad = np.flatnonzero(np.abs(np.diff(levels)) < 1e-9)
        if bad.size == 0:
            break
        levels[bad + 1] = rng.uniform(amp_low, amp_high, size=bad.size)
    lengths = np.diff(np.concatenate(([0], breaks, [n])))
    return np.repeat(levels, lengths)


def sparse_gradient_image(n: int, d: int, k: int, seed, amp_low: float = -10.0,
                          amp_high: float = 10.0, max_restarts: int = 1000) -> np.ndarray:
    """d-dimensional piecewise-constant array with exactly ``k`` nonzero
    anisotropic differences.

    Built by superimposing random axis-aligned boxes with random levels on a
    random constant background; a box is kept only if the running count of
    nonzero differences stays at most ``k``.  Construction restarts from the
    background after a stall.
    """
    from .operators import diff_nd

    if d < 2 or n < 2:
        raise InvalidArgument("need d >= 2 and n >= 2")
    max_k = d * (n - 1) * n ** (d - 1)
    if not 0 <= k <= max_k:
        raise InvalidArgument(f"k must lie in [0, {max_k}]")
    if not amp_low < amp_high:
        raise InvalidArgument("amp_low must be below amp_high")
    rng = as_seed(seed).rng()
    span = amp_high - amp_low
    for _ in range(max_restarts):
        X = np.full((n,) * d, rng.uniform(amp_low, amp_high))
        count = 0
        stalls = 0
        while count < k and stalls < 200:
            sides = rng.integers(1, max(2, n // 2) + 1, size=d)
            sides = np.minimum(sides, n)
            lo = [int(rng.integers(0, n - s + 1)) for s in sides]
            box = tuple(slice(a, a + s) for a, s in zip(lo, sides))
            delta = rng.uniform(0.1 * span, 0.5 * span) * rng.choice((-1.0, 1.0))
            trial = X.copy()
            trial[box] += delta
            c = int(np.count_nonzero(np.abs(diff_nd(trial)) > 1e-9))
            if c <= k and c > count:
                X, count, stalls = trial, c, 0
            else:
                stalls += 1
        if count == k and np.count_nonzero(diff_nd(X)) == k:
            return X
    raise InvalidArgument(f"could not build an image with exactly {k} jumps")
