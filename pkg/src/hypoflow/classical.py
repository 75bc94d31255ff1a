"""
Spectral Galerkin discretization of the Langevin and overdamped generators.

Functions are expanded in bases that are orthonormal in L^2(mu):

* velocity: normalized probabilists' Hermite polynomials ``He_k(v)/sqrt(k!)``;
* position, quadratic U = m x^2/2: ``He_i(sqrt(m) x)/sqrt(i!)``;
* position, periodic U: real Fourier modes ``1, cos x, sin x, cos 2x, ...``
  Gram-orthonormalized in L^2(e^{-U} dx) by trapezoidal quadrature.

The tensor basis is ordered x-major: index ``i * n_v + k`` holds
``phi_i(x) h_k(v)``. The Gram matrix is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg

from .hilbert import (
    GeneratorDecomposition,
    LinOp,
    WeightedSpace,
    spectral_gap,
    symmetry_check,
)


@dataclass(frozen=True)
class PotentialSpec:
    """One-dimensional potential.

    ``kind == "quadratic"``: U(x) = m x^2 / 2.
    ``kind == "periodic"``: U(x) = sum_k c_k e^{ikx}, coefficients listed for
    k = -K..K and conjugate symmetric.
    """

    kind: str
    m: float = 0.0
    coefficients: tuple = ()

    def __post_init__(self):
        if self.kind == "quadratic":
            if not (np.isfinite(self.m) and self.m > 0):
                raise ValueError("quadratic potential needs m > 0")
        elif self.kind == "periodic":
            c = np.asarray(self.coefficients, dtype=complex)
            if c.ndim != 1 or c.size % 2 != 1:
                raise ValueError("periodic coefficients must be listed for k = -K..K (odd length)")
            if np.max(np.abs(c - c[::-1].conj()), initial=0.0) > 1e-12 * max(1.0, np.abs(c).max()):
                raise ValueError("periodic coefficients must be conjugate symmetric (U real)")
            object.__setattr__(self, "coefficients", tuple(complex(z) for z in c))
        else:
            raise ValueError(f"unknown potential kind {self.kind!r}")

    @classmethod
    def quadratic(cls, m: float) -> "PotentialSpec":
        return cls("quadratic", m=float(m))

    @classmethod
    def periodic(cls, coefficients: Sequence[complex]) -> "PotentialSpec":
        return cls("periodic", coefficients=tuple(coefficients))

    @classmethod
    def free_torus(cls) -> "PotentialSpec":
        return cls("periodic", coefficients=(0.0,))

    @classmethod
    def cosine(cls, amplitude: float, mode: int = 1) -> "PotentialSpec":
        """U(x) = amplitude * cos(mode * x)."""
        c = np.zeros(2 * mode + 1, dtype=complex)
        c[0] = c[-1] = amplitude / 2
        return cls.periodic(c)

    @property
    def max_mode(self) -> int:
        return (len(self.coefficients) - 1) // 2

    def _modes(self):
        k = np.arange(-self.max_mode, self.max_mode + 1)
        return k, np.asarray(self.coefficients)

    def value(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return 0.5 * self.m * x**2
        k, c = self._modes()
        return np.real(np.exp(1j * np.multiply.outer(x, k)) @ c)

    def gradient(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "quadratic":
            return self.m * x
        k, c = self._modes()
        return np.real(np.exp(1j * np.multiply.outer(x, k)) @ (1j * k * c))

    def curvature_scale(self) -> float:
        """Bound on |U''|, used for step-size guards."""
        if self.kind == "quadratic":
            return self.m
        k, c = self._modes()
        return float(np.sum(np.abs(c) * k**2))

    def describe(self) -> dict:
        if self.kind == "quadratic":
            return {"kind": "quadratic", "m": self.m}
        return {"kind": "periodic", "coefficients": [[z.real, z.imag] for z in self.coefficients]}


def hermite_lowering(n: int) -> np.ndarray:
    """Matrix of d/dv on normalized Hermite functions: ``a[k-1, k] = sqrt(k)``."""
    return np.diag(np.sqrt(np.arange(1, n, dtype=float)), 1)


@dataclass(frozen=True)
class XBasis:
    """Galerkin matrices on the position basis (all orthonormal in L^2(mu_x))."""

    deriv: np.ndarray  # <phi_i, phi_j'>
    force: np.ndarray  # <phi_i, U' phi_j>
    stiffness: np.ndarray  # <phi_i', phi_j'>
    labels: tuple


def _quadratic_xbasis(m: float, n_x: int) -> XBasis:
    a = hermite_lowering(n_x)
    deriv = np.sqrt(m) * a
    force = np.sqrt(m) * (a + a.T)
    return XBasis(deriv, force, deriv.T @ deriv, tuple(range(n_x)))


def _fourier_columns(x, n_x):
    cols = [np.ones_like(x)]
    dcols = [np.zeros_like(x)]
    labels = ["1"]
    k = 1
    while len(cols) < n_x:
        cols += [np.cos(k * x), np.sin(k * x)]
        dcols += [-k * np.sin(k * x), k * np.cos(k * x)]
        labels += [f"cos{k}", f"sin{k}"]
        k += 1
    return np.stack(cols, 1), np.stack(dcols, 1), tuple(labels)


def _periodic_xbasis(pot: PotentialSpec, n_x: int) -> XBasis:
    if n_x % 2 == 0:
        raise ValueError("periodic basis needs odd n_x (constant plus cos/sin pairs)")
    kmax = (n_x - 1) // 2
    n_q = 8 * max(2 * kmax + pot.max_mode, 8)
    x = 2 * np.pi * np.arange(n_q) / n_q
    u = pot.value(x)
    if not np.all(np.isfinite(u)):
        raise ValueError("quadrature failure: potential not finite on the grid")
    w = np.exp(-(u - u.min()))
    if not np.all(np.isfinite(w)) or w.sum() <= 0:
        raise ValueError("quadrature failure: e^{-U} not integrable")
    w = w / w.sum()
    f, df, labels = _fourier_columns(x, n_x)
    g = f.T @ (w[:, None] * f)
    try:
        r = linalg.cholesky(g, lower=False)
    except linalg.LinAlgError as exc:
        raise ValueError("quadrature failure: Fourier Gram matrix not positive definite") from exc
    phi = linalg.solve_triangular(r, f.T, trans="T", lower=False).T
    dphi = linalg.solve_triangular(r, df.T, trans="T", lower=False).T
    wphi = w[:, None] * phi
    deriv = wphi.T @ dphi
    force = wphi.T @ (pot.gradient(x)[:, None] * phi)
    stiffness = dphi.T @ (w[:, None] * dphi)
    return XBasis(deriv, 0.5 * (force + force.T), 0.5 * (stiffness + stiffness.T), labels)


def x_basis(potential: PotentialSpec, n_x: int) -> XBasis:
    if n_x < 2:
        raise ValueError("n_x must be at least 2")
    if potential.kind == "quadratic":
        return _quadratic_xbasis(potential.m, n_x)
    return _periodic_xbasis(potential, n_x)


def build_langevin(
    potential: PotentialSpec, n_x: int, n_v: int, gamma: float = 1.0
) -> GeneratorDecomposition:
    """Galerkin decomposition ``L = L_a + gamma L_s`` of the Langevin generator.

    ``L_a = v d/dx - U'(x) d/dv`` and ``L_s = -v d/dv + d^2/dv^2``. The raw
    Galerkin ``L_a`` is replaced by its exact antisymmetric part; the size of
    that correction is stored in ``antisym_correction``.
    """
    if n_v < 2:
        raise ValueError("n_v must be at least 2")
    xb = x_basis(potential, n_x)
    a_v = hermite_lowering(n_v)
    mult_v = a_v + a_v.T
    raw = np.kron(xb.deriv, mult_v) - np.kron(xb.force, a_v)
    l_a = 0.5 * (raw - raw.T)
    correction = float(linalg.norm(raw - l_a, 2))
    l_s = np.kron(np.eye(n_x), -np.diag(np.arange(n_v, dtype=float)))

    space = WeightedSpace.euclidean(n_x * n_v)
    meta = tuple((i, k) for i in range(n_x) for k in range(n_v))
    label = f"langevin[{potential.kind}]"
    return GeneratorDecomposition.from_operators(
        LinOp(l_a, space), LinOp(l_s, space), gamma,
        basis_meta=meta, label=label, antisym_correction=correction,
    )


def build_overdamped(potential: PotentialSpec, n_x: int) -> LinOp:
    """Galerkin matrix of ``L_O = -U' d/dx + d^2/dx^2`` on the position basis."""
    xb = x_basis(potential, n_x)
    op = LinOp(-xb.stiffness, WeightedSpace.euclidean(n_x))
    res = symmetry_check(op)
    assert res.symmetric_residual < 1e-10, res
    return op


@dataclass(frozen=True)
class PoincareEstimate:
    value: float
    refined: float
    relative_change: float
    converged: bool
    n_x: int


def poincare_constant(potential: PotentialSpec, n_x: int, rtol: float = 1e-4) -> PoincareEstimate:
    """Poincare constant of mu_x as the spectral gap of ``L_O``, checked against 2 n_x."""
    n_ref = 2 * n_x + (1 if potential.kind == "periodic" else 0)
    value = spectral_gap(build_overdamped(potential, n_x)).gap
    refined = spectral_gap(build_overdamped(potential, n_ref)).gap
    change = abs(refined - value) / max(abs(refined), np.finfo(float).tiny)
    return PoincareEstimate(value, refined, change, change <= rtol, n_x)


def v_degree(decomp: GeneratorDecomposition) -> np.ndarray:
    """Velocity degree of every basis function of a Langevin decomposition."""
    if decomp.basis_meta is None:
        raise ValueError("decomposition carries no Hermite bookkeeping")
    return np.array([k for _, k in decomp.basis_meta])
