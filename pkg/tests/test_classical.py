import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from numpy.polynomial import hermite_e as He
from scipy import linalg

from hypoflow.classical import (
    PotentialSpec,
    build_langevin,
    build_overdamped,
    hermite_lowering,
    poincare_constant,
    v_degree,
    x_basis,
)
from hypoflow.hilbert import spectral_gap, symmetry_check


def test_potential_validation():
    with pytest.raises(ValueError):
        PotentialSpec.quadratic(0.0)
    with pytest.raises(ValueError, match="odd length"):
        PotentialSpec.periodic([1.0, 2.0])
    with pytest.raises(ValueError, match="conjugate symmetric"):
        PotentialSpec.periodic([1.0, 0.0, 2.0])
    u = PotentialSpec.cosine(2.0)
    x = np.linspace(0, 6, 7)
    assert np.allclose(u.value(x), 2 * np.cos(x)) and np.allclose(u.gradient(x), -2 * np.sin(x))


def test_small_quadratic_by_hand():
    d = build_langevin(PotentialSpec.quadratic(1.0), 2, 2)
    idx = {meta: j for j, meta in enumerate(d.basis_meta)}
    assert np.allclose(np.diag(d.l_s.matrix), [0, -1, 0, -1])
    la = d.l_a.matrix
    assert la[idx[(0, 1)], idx[(1, 0)]] == pytest.approx(1.0)  # L_a x = v
    assert la[idx[(1, 0)], idx[(0, 1)]] == pytest.approx(-1.0)  # L_a v = -x
    mask = np.ones_like(la, dtype=bool)
    mask[idx[(0, 1)], idx[(1, 0)]] = mask[idx[(1, 0)], idx[(0, 1)]] = False
    assert np.abs(la[mask]).max() == 0


def _hermite_fn(k, y):
    c = np.zeros(k + 1)
    c[k] = 1
    return He.hermeval(y, c) / math.sqrt(math.factorial(k)), He.hermeval(y, He.hermeder(c)) / math.sqrt(math.factorial(k))


@pytest.mark.parametrize("m", [1.0, 0.3])
def test_langevin_matrix_quadrature_oracle(m):
    """Entries <phi_i h_k, L_a phi_j h_l> by Gauss-Hermite quadrature in both variables."""
    n = 5
    d = build_langevin(PotentialSpec.quadratic(m), n, n)
    y, w = He.hermegauss(30)
    w = w / w.sum()
    x = y / np.sqrt(m)  # x ~ N(0, 1/m)
    fx = [_hermite_fn(i, y) for i in range(n)]  # values and d/dy
    fv = [_hermite_fn(k, y) for k in range(n)]
    oracle = np.zeros((n * n, n * n))
    for i in range(n):
        for k in range(n):
            for j in range(n):
                for l in range(n):
                    # L_a (phi_j h_l) = v phi_j'(x) h_l(v) - m x phi_j(x) h_l'(v)
                    dphi = np.sqrt(m) * fx[j][1]
                    t1 = np.sum(w * fx[i][0] * dphi) * np.sum(w * fv[k][0] * y * fv[l][0])
                    t2 = np.sum(w * fx[i][0] * m * x * fx[j][0]) * np.sum(w * fv[k][0] * fv[l][1])
                    oracle[i * n + k, j * n + l] = t1 - t2
    assert np.abs(d.l_a.matrix - oracle).max() < 1e-12
    assert d.antisym_correction < 1e-14


def test_structure_invariants():
    for pot, nx in [(PotentialSpec.quadratic(0.7), 6), (PotentialSpec.cosine(1.5), 7), (PotentialSpec.free_torus(), 5)]:
        d = build_langevin(pot, nx, 5, 1.3)
        res = d.structure_residuals()
        assert max(res.values()) < 1e-10, res
        assert np.abs(d.l_a.matrix[:, 0]).max() < 1e-12 and np.abs(d.l_s.matrix[:, 0]).max() == 0
        php = d.pi_s.matrix @ d.l_a.matrix @ d.pi_s.matrix
        assert linalg.norm(php) < 1e-10


def test_velocity_degree_bookkeeping():
    d = build_langevin(PotentialSpec.quadratic(1.0), 3, 4)
    assert np.array_equal(v_degree(d), np.tile(np.arange(4), 3))
    assert np.array_equal(np.diag(d.l_s.matrix), -v_degree(d))


def test_critical_damping_gap():
    d = build_langevin(PotentialSpec.quadratic(1.0), 16, 16, 2.0)
    assert abs(spectral_gap(d.generator()).gap - 1.0) < 1e-6


def test_overdamped_spectra():
    w = np.sort(np.linalg.eigvalsh(build_overdamped(PotentialSpec.quadratic(1.0), 6).matrix))[::-1]
    assert np.allclose(w, -np.arange(6), atol=1e-8)
    op = build_overdamped(PotentialSpec.quadratic(1.0), 6)
    assert np.abs(op @ np.eye(6)[0]).max() == 0
    assert symmetry_check(op).symmetric_residual < 1e-10
    w = np.sort(np.linalg.eigvalsh(build_overdamped(PotentialSpec.free_torus(), 7).matrix))[::-1]
    assert np.allclose(w, [0, -1, -1, -4, -4, -9, -9], atol=1e-10)


def test_periodic_needs_odd():
    with pytest.raises(ValueError, match="odd"):
        build_langevin(PotentialSpec.free_torus(), 4, 4)


def test_poincare_constants():
    assert abs(poincare_constant(PotentialSpec.quadratic(0.04), 8).value - 0.04) < 1e-8
    assert abs(poincare_constant(PotentialSpec.quadratic(1.0), 8).value - 1.0) < 1e-8
    est = poincare_constant(PotentialSpec.free_torus(), 5)
    assert abs(est.value - 1.0) < 1e-12 and est.converged


def _fd_poincare(pot, n=600):
    """Finite-volume oracle: -(e^{-U} f')' = lam e^{-U} f on a periodic grid."""
    h = 2 * np.pi / n
    x = h * np.arange(n)
    rho = np.exp(-pot.value(x))
    rho_half = np.exp(-pot.value(x + h / 2))
    k = np.zeros((n, n))
    for i in range(n):
        j = (i + 1) % n
        k[i, i] += rho_half[i]
        k[j, j] += rho_half[i]
        k[i, j] -= rho_half[i]
        k[j, i] -= rho_half[i]
    w = linalg.eigh(k / h**2, np.diag(rho), eigvals_only=True)
    return w[1]


def test_periodic_poincare_against_finite_volume():
    pot = PotentialSpec.cosine(1.0)
    est = poincare_constant(pot, 17)
    assert est.converged
    assert abs(est.value - _fd_poincare(pot)) < 1e-4 * est.value


def test_x_basis_orthonormal_quadrature():
    pot = PotentialSpec.cosine(0.8, mode=2)
    xb = x_basis(pot, 9)
    # the constant mode has zero derivative and zero energy; stiffness is PSD
    assert np.abs(xb.deriv[:, 0]).max() < 1e-12
    assert np.abs(xb.stiffness[0]).max() < 1e-12
    assert np.linalg.eigvalsh(xb.stiffness)[0] > -1e-12
    # integration by parts: <phi_i, phi_j'> + <phi_i', phi_j> = <phi_i, U' phi_j>
    assert np.allclose(xb.deriv + xb.deriv.T, xb.force, atol=1e-10)


def test_hermite_lowering():
    a = hermite_lowering(4)
    assert np.allclose(a, np.diag([1, np.sqrt(2), np.sqrt(3)], 1))


@given(st.floats(0.05, 4.0), st.floats(0.1, 5.0), st.integers(0, 2**31))
def test_gaussian_poincare_random_vectors(m, gamma, seed):
    d = build_langevin(PotentialSpec.quadratic(m), 6, 6, gamma)
    rng = np.random.default_rng(seed)
    f = rng.standard_normal((d.dim, 100))
    off = f - d.pi_s.matrix @ f
    lhs = np.sum(off**2, axis=0)
    rhs = np.sum(f * (-d.l_s.matrix @ f), axis=0)
    assert np.all(lhs <= rhs + 1e-12)


@given(st.floats(0.05, 4.0), st.floats(0.1, 5.0))
def test_quadratic_gap_formula(m, gamma):
    d = build_langevin(PotentialSpec.quadratic(m), 6, 6, gamma)
    oracle = np.real(gamma - np.sqrt(complex(gamma**2 - 4 * m))) / 2
    assert abs(spectral_gap(d.generator()).gap - oracle) < 1e-6 * max(1.0, oracle)


def test_truncation_convergence():
    g8 = spectral_gap(build_langevin(PotentialSpec.quadratic(0.5), 8, 8, 0.9).generator()).gap
    g16 = spectral_gap(build_langevin(PotentialSpec.quadratic(0.5), 16, 16, 0.9).generator()).gap
    assert abs(g8 - g16) < 1e-4 * g16
