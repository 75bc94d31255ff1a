"""
Finite-dimensional weighted Hilbert spaces and the linear operators on them.

A :class:`WeightedSpace` is C^n (or R^n) with the inner product
``<x, y> = x^H G y`` for a Hermitian positive definite Gram matrix ``G``.
Every weighted computation is reduced to a Euclidean one by conjugating with
the upper Cholesky factor ``R`` (``G = R^H R``): the map ``x -> R x`` is an
isometry onto C^n with the standard inner product.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import linalg, sparse
from scipy.sparse import csgraph

DEFAULT_TOL = 1e-9
SYMMETRY_TOL = 1e-8
# eigendecomposition path of the propagator is used below this eigenvector condition number
EIG_COND_LIMIT = 1e4


class NumericalError(RuntimeError):
    """A numerical computation failed or produced an inconsistent result."""


class NotDissipativeError(NumericalError):
    pass


class DegenerateMetricError(ValueError):
    pass


def _as_matrix(a) -> np.ndarray:
    a = np.asarray(a)
    if a.dtype.kind not in "fc":
        a = a.astype(float)
    return a


@dataclass(frozen=True, eq=False)
class WeightedSpace:
    """Inner-product space ``<x, y> = x^H gram y``."""

    gram: np.ndarray
    field: str = ""

    def __post_init__(self):
        g = _as_matrix(self.gram)
        if g.ndim != 2 or g.shape[0] != g.shape[1] or g.shape[0] == 0:
            raise ValueError(f"gram must be a non-empty square matrix, got shape {g.shape}")
        if not np.all(np.isfinite(g)):
            raise ValueError("gram has non-finite entries")
        scale = max(linalg.norm(g), np.finfo(float).tiny)
        if linalg.norm(g - g.conj().T) > 1e-12 * scale:
            raise ValueError("gram is not Hermitian")
        g = 0.5 * (g + g.conj().T)
        fld = self.field or ("complex" if np.iscomplexobj(g) else "real")
        if fld not in ("real", "complex"):
            raise ValueError(f"unknown field {fld!r}")
        if fld == "real" and np.iscomplexobj(g):
            if np.abs(g.imag).max() > 1e-12 * scale:
                raise ValueError("complex gram on a real space")
            g = g.real.copy()
        w = linalg.eigvalsh(g)
        if w[0] <= 0:
            raise ValueError("gram is not positive definite")
        g.setflags(write=False)
        object.__setattr__(self, "gram", g)
        object.__setattr__(self, "field", fld)

    @classmethod
    def euclidean(cls, dim: int, field: str = "real") -> "WeightedSpace":
        return cls(np.eye(dim), field)

    @property
    def dim(self) -> int:
        return self.gram.shape[0]

    @cached_property
    def is_identity(self) -> bool:
        return bool(np.array_equal(self.gram, np.eye(self.dim)))

    @cached_property
    def condition(self) -> float:
        w = linalg.eigvalsh(self.gram)
        return float(w[-1] / w[0])

    @cached_property
    def chol(self) -> np.ndarray:
        """Upper factor ``R`` with ``gram = R^H R``."""
        if self.is_identity:
            return np.eye(self.dim)
        return linalg.cholesky(self.gram, lower=False)

    @cached_property
    def chol_inv(self) -> np.ndarray:
        if self.is_identity:
            return np.eye(self.dim)
        return linalg.solve_triangular(self.chol, np.eye(self.dim), lower=False)

    def check_invertible(self):
        if self.condition * np.finfo(float).eps > 1e-2:
            raise DegenerateMetricError("degenerate metric")

    def inner(self, x, y) -> complex | float:
        x = np.asarray(x)
        y = np.asarray(y)
        return np.vdot(x, self.gram @ y) if self.field == "complex" else float(x @ self.gram @ y)

    def norm(self, x) -> float:
        return float(np.linalg.norm(self.chol @ np.asarray(x), axis=0))

    def norms(self, X) -> np.ndarray:
        """Column-wise weighted norms."""
        return np.linalg.norm(self.chol @ np.asarray(X), axis=0)

    def to_euclidean(self, x) -> np.ndarray:
        return self.chol @ np.asarray(x)

    def from_euclidean(self, y) -> np.ndarray:
        return self.chol_inv @ np.asarray(y)


@dataclass(frozen=True, eq=False)
class LinOp:
    """A matrix acting on a :class:`WeightedSpace`."""

    matrix: np.ndarray
    space: WeightedSpace

    def __post_init__(self):
        a = _as_matrix(self.matrix)
        if a.shape != (self.space.dim, self.space.dim):
            raise ValueError(f"matrix shape {a.shape} does not match space dimension {self.space.dim}")
        if self.space.field == "complex":
            a = a.astype(complex)
        elif np.iscomplexobj(a):
            raise ValueError("complex matrix on a real space")
        a = np.array(a)
        a.setflags(write=False)
        object.__setattr__(self, "matrix", a)

    @property
    def dim(self) -> int:
        return self.space.dim

    @cached_property
    def euclidean(self) -> np.ndarray:
        """The matrix ``R A R^{-1}`` acting on isometric Euclidean coordinates."""
        if self.space.is_identity:
            return np.asarray(self.matrix)
        return self.space.chol @ self.matrix @ self.space.chol_inv

    @classmethod
    def from_euclidean(cls, m, space: WeightedSpace) -> "LinOp":
        m = np.asarray(m)
        if space.is_identity:
            return cls(m, space)
        return cls(space.chol_inv @ m @ space.chol, space)

    @classmethod
    def identity(cls, space: WeightedSpace) -> "LinOp":
        return cls(np.eye(space.dim), space)

    @classmethod
    def zero(cls, space: WeightedSpace) -> "LinOp":
        return cls(np.zeros((space.dim, space.dim)), space)

    def norm(self) -> float:
        """Weighted operator norm."""
        return float(linalg.norm(self.euclidean, 2)) if self.dim else 0.0

    def __call__(self, v):
        return self.matrix @ np.asarray(v)

    def _check_same(self, other: "LinOp"):
        if other.space is not self.space and not (
            other.space.dim == self.space.dim and np.array_equal(other.space.gram, self.space.gram)
        ):
            raise ValueError("operators live on different spaces")

    def __add__(self, other: "LinOp") -> "LinOp":
        self._check_same(other)
        return LinOp(self.matrix + other.matrix, self.space)

    def __sub__(self, other: "LinOp") -> "LinOp":
        self._check_same(other)
        return LinOp(self.matrix - other.matrix, self.space)

    def __neg__(self) -> "LinOp":
        return LinOp(-self.matrix, self.space)

    def __mul__(self, c) -> "LinOp":
        return LinOp(c * self.matrix, self.space)

    __rmul__ = __mul__

    def __matmul__(self, other):
        if isinstance(other, LinOp):
            self._check_same(other)
            return LinOp(self.matrix @ other.matrix, self.space)
        return self.matrix @ np.asarray(other)


@dataclass(frozen=True)
class SpectralReport:
    eigenvalues: np.ndarray
    gap: float
    kernel_dim: int
    tolerance_used: float


@dataclass(frozen=True)
class SymmetryReport:
    classification: str
    symmetric_residual: float
    antisymmetric_residual: float


def adjoint(op: LinOp) -> LinOp:
    """Weighted adjoint ``A* = G^{-1} A^H G``."""
    op.space.check_invertible()
    if op.space.is_identity:
        return LinOp(op.matrix.conj().T, op.space)
    g = op.space.gram
    return LinOp(linalg.cho_solve((op.space.chol, False), op.matrix.conj().T @ g), op.space)


def symmetry_check(op: LinOp, tol: float = SYMMETRY_TOL) -> SymmetryReport:
    """Classify ``op`` as symmetric, antisymmetric or neither.

    Residuals are relative weighted operator norms ``||A* - A|| / ||A||`` and
    ``||A* + A|| / ||A||``; both are zero for the zero operator, which is then
    reported as antisymmetric.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = op.euclidean
    scale = linalg.norm(a, 2)
    if scale == 0:
        return SymmetryReport("antisymmetric", 0.0, 0.0)
    sym = float(linalg.norm(a.conj().T - a, 2) / scale)
    anti = float(linalg.norm(a.conj().T + a, 2) / scale)
    if anti < tol and anti <= sym:
        cls = "antisymmetric"
    elif sym < tol:
        cls = "symmetric"
    else:
        cls = "neither"
    return SymmetryReport(cls, sym, anti)


def _canonical_basis(null: np.ndarray) -> np.ndarray:
    """Deterministic orthonormal basis of span(null) via pivoted QR of its projector."""
    k = null.shape[1]
    if k == 0:
        return null
    proj = null @ null.conj().T
    q, r, _ = linalg.qr(proj, pivoting=True)
    q = q[:, :k]
    d = np.diag(r)[:k]
    phase = np.where(np.abs(d) > 0, d / np.where(np.abs(d) > 0, np.abs(d), 1), 1)
    return q * phase.conj()


def euclidean_kernel(a: np.ndarray, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Orthonormal basis of ``{x : ||a x|| <= tol ||a|| ||x||}`` in Euclidean coordinates."""
    n = a.shape[1]
    if n == 0:
        return np.zeros((0, 0))
    _, s, vh = linalg.svd(a)
    smax = s[0] if s.size else 0.0
    rank = int(np.sum(s > tol * smax)) if smax > 0 else 0
    null = vh[rank:].conj().T
    return _canonical_basis(null)


def kernel_basis(op: LinOp, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gram-orthonormal basis (as columns) of the numerical kernel of ``op``."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    q = euclidean_kernel(op.euclidean, tol)
    if q.shape[1] == 0:
        return np.zeros((op.dim, 0), dtype=op.matrix.dtype)
    b = op.space.from_euclidean(q)
    if op.space.field == "real":
        b = b.real
    return b


def kernel_intersection(ops: Sequence[LinOp], tol: float = DEFAULT_TOL) -> np.ndarray:
    """Gram-orthonormal basis of the common kernel of several operators on one space."""
    space = ops[0].space
    stacked = np.vstack([op.euclidean / max(op.norm(), 1e-300) for op in ops])
    q = euclidean_kernel(stacked, tol)
    if q.shape[1] == 0:
        return np.zeros((space.dim, 0), dtype=ops[0].matrix.dtype)
    b = space.from_euclidean(q)
    return b.real if space.field == "real" else b


def orthonormalize(basis: np.ndarray, space: WeightedSpace) -> np.ndarray:
    """Gram-orthonormalize the columns of a full-column-rank ``basis``."""
    basis = np.asarray(basis)
    if basis.shape[1] == 0:
        return basis
    q, _ = linalg.qr(space.to_euclidean(basis), mode="economic")
    b = space.from_euclidean(_canonical_basis(q))
    return b.real if space.field == "real" else b


def projector(basis: np.ndarray, space: WeightedSpace, tol: float = 1e-10) -> LinOp:
    """Orthogonal projector onto the span of gram-orthonormal columns."""
    basis = np.asarray(basis)
    if basis.ndim != 2 or basis.shape[0] != space.dim:
        raise ValueError("basis must be a (dim, k) array")
    k = basis.shape[1]
    if k == 0:
        return LinOp.zero(space)
    overlap = basis.conj().T @ space.gram @ basis
    if linalg.norm(overlap - np.eye(k)) > tol * max(1, k):
        raise ValueError("basis not orthonormal")
    p = basis @ basis.conj().T @ space.gram
    if space.field == "real":
        p = p.real
    return LinOp(p, space)


def subspace_distance(b1: np.ndarray, b2: np.ndarray, space: WeightedSpace) -> float:
    """Operator-norm distance between the orthogonal projectors onto two subspaces."""
    p1 = space.to_euclidean(b1)
    p2 = space.to_euclidean(b2)
    diff = p1 @ p1.conj().T - p2 @ p2.conj().T
    return float(linalg.norm(diff, 2)) if diff.size else 0.0


def _sorted_eigenvalues(w: np.ndarray) -> np.ndarray:
    order = np.lexsort((np.arange(w.size), w.imag, w.real))
    return w[order]


def invariant_blocks(a: np.ndarray) -> list[np.ndarray]:
    """Index sets of the connected components of the sparsity graph of ``a``.

    Each component spans a subspace invariant under ``a`` and ``a^H``, so
    eigenvalues, singular values and semigroups can be computed block by block.
    """
    n = a.shape[0]
    if n == 0:
        return []
    ncomp, labels = csgraph.connected_components(
        sparse.csr_matrix((a != 0) | (a.T != 0)), directed=False
    )
    return [np.flatnonzero(labels == c) for c in range(ncomp)]


def spectral_gap(op: LinOp, tol: float = DEFAULT_TOL) -> SpectralReport:
    """Spectral gap ``min{Re(-lambda) : lambda != 0}`` of a dissipative generator.

    Eigenvalues with ``|lambda| <= tol * ||op||`` count as kernel.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = op.euclidean
    w = np.concatenate([linalg.eigvals(a[np.ix_(b, b)]) for b in invariant_blocks(a)] or [np.zeros(0)])
    w = _sorted_eigenvalues(w.astype(complex))
    thr = tol * op.norm()
    if np.any(w.real > thr):
        raise NotDissipativeError(f"not dissipative: max Re(lambda) = {w.real.max():.3e}")
    in_kernel = np.abs(w) <= thr
    rest = w[~in_kernel]
    if rest.size == 0:
        raise NumericalError("spectral gap undefined: empty nonzero spectrum")
    gap = float(np.min(-rest.real))
    return SpectralReport(w, max(gap, 0.0), int(in_kernel.sum()), float(thr))


def singular_value_gap(op: LinOp, tol: float = DEFAULT_TOL) -> float:
    """Smallest weighted singular value of ``op`` on the complement of its kernel."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    a = op.euclidean
    s = np.concatenate([linalg.svdvals(a[np.ix_(b, b)]) for b in invariant_blocks(a)] or [np.zeros(0)])
    if s.size == 0 or s.max() == 0:
        raise NumericalError("singular value gap undefined: zero operator")
    return float(s[s > tol * s.max()].min())


def _norm2(e: np.ndarray) -> float:
    """Spectral norm from the top eigenvalue of ``e^H e`` (cheaper than a full SVD)."""
    n = e.shape[1]
    if n == 0:
        return 0.0
    try:
        top = linalg.eigvalsh(e.conj().T @ e, subset_by_index=[n - 1, n - 1], driver="evx",
                              check_finite=False)[0]
    except linalg.LinAlgError:
        return float(linalg.norm(e, 2))
    return float(np.sqrt(max(top, 0.0)))


class _BlockDecay:
    """``t -> ||exp(tA)(I - P)||_2`` for a Euclidean matrix ``A``, ``P`` the kernel projector.

    Works block by block over :func:`invariant_blocks`; the kernel threshold
    is relative to the norm of the whole matrix.
    """

    def __init__(self, a: np.ndarray, tol: float = DEFAULT_TOL):
        _check_finite(a)
        self.blocks = []
        self._right = {}
        anorm = linalg.norm(a, 2) if a.size else 0.0
        for idx in invariant_blocks(a):
            ab = a[np.ix_(idx, idx)]
            _, s, vh = linalg.svd(ab)
            null = vh[int(np.sum(s > tol * anorm)):].conj().T
            q = np.eye(idx.size) - null @ null.conj().T
            if null.shape[1] == idx.size:
                continue
            fld = "complex" if np.iscomplexobj(ab) else "real"
            prop = Propagator(LinOp(ab, WeightedSpace.euclidean(idx.size, fld)))
            self.blocks.append((q, prop))

    def _block_norm(self, q, prop, t):
        if prop.method == "eig" and t > 0:
            if id(q) not in self._right:
                self._right[id(q)] = prop._vinv @ q
            e = (prop._v * np.exp(t * prop._w)) @ self._right[id(q)]
        else:
            e = prop.matrix(t) @ q
        return _norm2(e)

    def __call__(self, t: float) -> float:
        return max((self._block_norm(q, prop, t) for q, prop in self.blocks), default=0.0)


def pseudo_inverse(op: LinOp, tol: float = DEFAULT_TOL) -> LinOp:
    """Moore-Penrose pseudoinverse of a self-adjoint operator.

    Eigenvalues below ``tol * max|lambda|`` are treated as kernel.
    """
    rep = symmetry_check(op)
    if rep.symmetric_residual >= SYMMETRY_TOL:
        raise ValueError("pseudoinverse requires symmetric operator")
    a = op.euclidean
    a = 0.5 * (a + a.conj().T)
    w, v = linalg.eigh(a)
    wmax = np.abs(w).max() if w.size else 0.0
    keep = np.abs(w) > tol * wmax
    inv = np.zeros_like(w)
    inv[keep] = 1.0 / w[keep]
    p = (v * inv) @ v.conj().T
    return LinOp.from_euclidean(p if op.space.field == "complex" else p.real, op.space)


def _check_finite(*arrays):
    for a in arrays:
        if not np.all(np.isfinite(np.asarray(a))):
            raise ValueError("non-finite input")


class Propagator:
    """Evaluates ``exp(tA)`` for many ``t``.

    Uses an eigendecomposition when the eigenvector matrix is well conditioned
    (``cond < EIG_COND_LIMIT``), scaling-and-squaring Pade otherwise.
    """

    def __init__(self, op: LinOp, method: str = "auto"):
        if method not in ("auto", "pade", "eig"):
            raise ValueError(f"unknown method {method!r}")
        _check_finite(op.matrix)
        self.op = op
        self.method = "pade"
        if method in ("auto", "eig"):
            w, v = linalg.eig(op.matrix)
            cond = np.linalg.cond(v)
            if method == "eig" or cond < EIG_COND_LIMIT:
                self.method = "eig"
                self._w = w
                self._v = v
                self._vinv = linalg.inv(v)

    def matrix(self, t: float) -> np.ndarray:
        if t < 0:
            raise ValueError("t must be nonnegative")
        if t == 0:
            return np.eye(self.op.dim, dtype=self.op.matrix.dtype)
        if self.method == "eig":
            e = (self._v * np.exp(t * self._w)) @ self._vinv
            if not np.iscomplexobj(self.op.matrix):
                e = e.real
            return e
        return linalg.expm(t * self.op.matrix)

    def apply(self, t: float, v) -> np.ndarray:
        return self.matrix(t) @ np.asarray(v)


def semigroup_apply(op: LinOp, t: float, v, method: str = "pade") -> np.ndarray:
    """Return ``exp(t A) v``; ``v`` may be a vector or a matrix of column vectors."""
    _check_finite([t], v, op.matrix)
    if t < 0:
        raise ValueError("t must be nonnegative")
    return Propagator(op, method).apply(t, v)


def semigroup_decay(op: LinOp, times, tol: float = DEFAULT_TOL) -> np.ndarray:
    """Weighted norms ``||exp(tL)(I - P_inf)||`` on a grid of times.

    ``P_inf`` is the orthogonal projector onto ker(L).
    """
    f = _BlockDecay(op.euclidean, tol)
    return np.array([f(t) for t in np.asarray(times, dtype=float)])


def decay_prefactor(op: LinOp, nu: float, times, tol: float = DEFAULT_TOL) -> float:
    """``max_t ||exp(tL)(I - P_inf)|| e^{nu t}`` over ``times`` (t = 0 always included)."""
    times = np.unique(np.concatenate([[0.0], np.asarray(times, dtype=float)]))
    f = semigroup_decay(op, times, tol)
    return float(np.max(f * np.exp(nu * times)))


@dataclass(frozen=True)
class RelaxationReport:
    t_rel: float
    lower_bound: float
    singular_gap: float
    bound_holds: bool
    evaluations: int = field(default=0, compare=False)


def relaxation_time(
    op: LinOp, tol: float = DEFAULT_TOL, t_max: float | None = None, rtol: float = 1e-3
) -> RelaxationReport:
    """Relaxation time by bracketing and bisection, with its singular-value lower bound.

    ``t_rel`` is the right end of the final bisection bracket, so
    ``||exp(t_rel L)(I - P_inf)|| <= e^{-1}`` always holds.
    """
    sgap = singular_value_gap(op, tol)
    lower = 1.0 / (2.0 * sgap)
    decay = _BlockDecay(op.euclidean, tol)
    if not decay.blocks:
        raise NumericalError("relaxation time undefined: operator is zero")
    target = np.exp(-1.0)
    n_eval = 0

    def f(t):
        nonlocal n_eval
        n_eval += 1
        return decay(t)

    if t_max is None:
        t_max = 1e4 / sgap
    lo, hi = 0.0, lower
    while f(hi) > target:
        lo, hi = hi, 2 * hi
        if hi > t_max:
            raise NumericalError(f"did not relax before t_max = {t_max:g}")
    while hi - lo > rtol * hi:
        mid = 0.5 * (lo + hi)
        if f(mid) > target:
            lo = mid
        else:
            hi = mid
    holds = hi >= lower * (1 - 1e-6)
    if not holds:
        raise NumericalError(f"relaxation time {hi:g} below singular-value bound {lower:g}")
    return RelaxationReport(float(hi), float(lower), float(sgap), bool(holds), n_eval)


@dataclass(frozen=True, eq=False)
class GeneratorDecomposition:
    """``L_gamma = l_a + gamma * l_s`` with l_a antisymmetric and l_s symmetric.

    ``ker_basis`` is a gram-orthonormal basis of ker(l_s) and ``pi_s`` the
    orthogonal projector onto it.
    """

    l_a: LinOp
    l_s: LinOp
    gamma: float
    pi_s: LinOp
    ker_basis: np.ndarray
    basis_meta: tuple | None = None
    antisym_correction: float = 0.0
    label: str = ""

    @property
    def space(self) -> WeightedSpace:
        return self.l_a.space

    @property
    def dim(self) -> int:
        return self.l_a.dim

    def generator(self, gamma: float | None = None) -> LinOp:
        g = self.gamma if gamma is None else gamma
        return self.l_a + g * self.l_s

    def with_gamma(self, gamma: float) -> "GeneratorDecomposition":
        return GeneratorDecomposition(
            self.l_a, self.l_s, float(gamma), self.pi_s, self.ker_basis,
            self.basis_meta, self.antisym_correction, self.label,
        )

    @classmethod
    def from_operators(
        cls, l_a: LinOp, l_s: LinOp, gamma: float = 1.0, *, basis_meta=None,
        label: str = "", tol: float = DEFAULT_TOL, antisym_correction: float = 0.0,
    ) -> "GeneratorDecomposition":
        if gamma <= 0:
            raise ValueError("gamma must be positive")
        l_s._check_same(l_a)
        basis = kernel_basis(l_s, tol)
        return cls(l_a, l_s, float(gamma), projector(basis, l_s.space), basis,
                   basis_meta, antisym_correction, label)

    def structure_residuals(self) -> dict:
        """(Anti)symmetry and kernel-projection residuals of the decomposition."""
        a = symmetry_check(self.l_a)
        s = symmetry_check(self.l_s)
        scale = max(self.l_s.norm(), 1.0)
        return {
            "l_a_antisymmetric": a.antisymmetric_residual,
            "l_s_symmetric": s.symmetric_residual,
            "l_s_pi_s": (self.l_s @ self.pi_s).norm() / scale,
            "pi_s_l_s": (self.pi_s @ self.l_s).norm() / scale,
        }
