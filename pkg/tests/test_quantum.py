import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import linalg

from hypoflow.hilbert import NumericalError, kernel_basis, symmetry_check
from hypoflow.quantum import (
    PAULI,
    SIGMA_MINUS,
    SIGMA_PLUS,
    DensityMatrix,
    LindbladModel,
    build_lindblad_heisenberg,
    check_detailed_balance,
    commutant_kernel,
    heisenberg_generator,
    kms_inner,
    kms_space,
    pauli_operator,
    schrodinger_generator,
    spost,
    spre,
    stationary_state,
    thermal_qubit,
    two_qubit_lift,
    unvec,
    vec,
)

X, Y, Z, I2 = PAULI["X"], PAULI["Y"], PAULI["Z"], PAULI["I"]
CATALOG = [thermal_qubit, two_qubit_lift]


def gksl_heisenberg(h, jumps, gamma):
    """Textbook adjoint Lindbladian acting on a matrix A (no vectorization)."""
    def apply(a):
        out = 1j * (h @ a - a @ h)
        for l in jumps:
            ld = l.conj().T
            out = out + gamma * (ld @ a @ l - 0.5 * (ld @ l @ a + a @ ld @ l))
        return out
    return apply


def random_state(rng, d):
    g = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    r = g @ g.conj().T
    return r / np.trace(r).real


def test_vectorization_convention(rng):
    a, b, x = (rng.standard_normal((3, 3)) for _ in range(3))
    assert np.allclose(vec(a @ x @ b), np.kron(b.T, a) @ vec(x))
    assert np.allclose(spre(a) @ vec(x), vec(a @ x)) and np.allclose(spost(b) @ vec(x), vec(x @ b))
    assert np.array_equal(unvec(vec(x)), x)


def test_pauli_labels():
    assert np.array_equal(pauli_operator("XZ"), np.kron(X, Z))
    assert np.array_equal(pauli_operator("Z1", 2), np.kron(Z, I2))
    assert np.array_equal(pauli_operator("x2", 2), np.kron(I2, X))
    with pytest.raises(ValueError):
        pauli_operator("Q")
    with pytest.raises(ValueError):
        pauli_operator("Z3", 2)


def test_model_validation():
    with pytest.raises(ValueError, match="Hermitian"):
        LindbladModel(np.array([[0, 1], [0, 0]]), (I2,))
    with pytest.raises(ValueError, match="at least one"):
        LindbladModel(Z, ())
    with pytest.raises(ValueError):
        DensityMatrix(np.diag([0.5, 0.6]))


def test_thermal_qubit_state():
    res = stationary_state(thermal_qubit())
    assert np.allclose(res.state.matrix, np.diag([1 / 3, 2 / 3]), atol=1e-12)
    assert res.unique and res.full_rank and res.residual < 1e-12
    # independent null-space oracle
    null = linalg.null_space(schrodinger_generator(thermal_qubit()))
    rho = unvec(null[:, 0])
    assert np.allclose(rho / np.trace(rho), res.state.matrix, atol=1e-12)


def test_identity_jump_degenerate():
    m = LindbladModel(Z, (I2,))
    res = stationary_state(m)
    assert np.allclose(res.state.matrix, I2 / 2) and not res.unique
    d = build_lindblad_heisenberg(m)
    assert d.ker_basis.shape[1] == 4
    assert commutant_kernel(m).dims["ker_ls"] == 4


def test_two_qubit_state():
    res = stationary_state(two_qubit_lift())
    assert np.allclose(res.state.matrix, np.eye(4) / 4, atol=1e-12) and res.full_rank


def test_kms_examples():
    space = kms_space(DensityMatrix(np.eye(3) / 3))
    assert np.allclose(space.gram, np.eye(9) / 3)
    sigma = DensityMatrix(np.diag([1 / 3, 2 / 3]))
    assert abs(kms_inner(SIGMA_PLUS, SIGMA_PLUS, sigma) - np.sqrt(2) / 3) < 1e-15
    sp = kms_space(sigma)
    assert abs(sp.inner(vec(SIGMA_PLUS), vec(SIGMA_PLUS)) - np.sqrt(2) / 3) < 1e-12
    with pytest.raises(ValueError, match="full-rank"):
        kms_space(DensityMatrix(np.diag([1.0, 0.0])))


@given(st.integers(0, 2**31))
def test_kms_gram_reproduces_trace_formula(seed):
    rng = np.random.default_rng(seed)
    sigma = DensityMatrix(random_state(rng, 3))
    space = kms_space(sigma)
    a = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    b = rng.standard_normal((3, 3)) + 1j * rng.standard_normal((3, 3))
    s = linalg.sqrtm(sigma.matrix)
    oracle = np.trace(s @ a.conj().T @ s @ b)
    assert abs(space.inner(vec(a), vec(b)) - oracle) < 1e-12 * max(1, abs(oracle))
    assert abs(space.norm(vec(np.eye(3))) - 1) < 1e-12


def test_dissipator_normalization():
    """L_s is twice the textbook GKSL dissipator; thermal-qubit spectrum doubles accordingly."""
    m = thermal_qubit()
    d = build_lindblad_heisenberg(m)
    oracle = gksl_heisenberg(0 * m.hamiltonian, m.jumps, 1.0)
    basis = [unvec(e) for e in np.eye(4)]
    mat = np.column_stack([vec(oracle(b)) for b in basis])
    assert np.allclose(d.l_s.matrix, 2 * mat, atol=1e-14)
    w = np.sort(np.linalg.eigvals(mat).real)
    assert np.allclose(w, [-1, -0.5, -0.5, 0], atol=1e-12)  # total rate 2/3 + 1/3 = 1
    assert np.allclose(np.sort(np.linalg.eigvals(d.l_s.matrix).real), 2 * w, atol=1e-12)
    assert np.abs(d.l_s.matrix @ vec(I2)).max() < 1e-15


def test_hamiltonian_part_matches_commutator(rng):
    m = two_qubit_lift(0.7)
    a = rng.standard_normal((4, 4))
    oracle = gksl_heisenberg(m.hamiltonian, m.jumps, 2 * 0.7)(a)
    assert np.allclose(unvec(heisenberg_generator(m) @ vec(a)), oracle, atol=1e-13)


def test_zero_hamiltonian_gives_zero_la():
    m = LindbladModel(np.zeros((2, 2)), thermal_qubit().jumps)
    assert np.abs(build_lindblad_heisenberg(m).l_a.matrix).max() == 0


def test_kms_symmetry_enforced():
    m = LindbladModel(X, (SIGMA_MINUS,))  # sigma = |1><1| is not full rank
    with pytest.raises((ValueError, NumericalError)):
        build_lindblad_heisenberg(m)
    # full-rank state but non-KMS-symmetric dissipator
    bad = LindbladModel(0.3 * X, (SIGMA_MINUS, 0.5 * SIGMA_PLUS))
    with pytest.raises(ValueError, match="violates KMS"):
        build_lindblad_heisenberg(bad)


def test_detailed_balance():
    m = thermal_qubit()
    sigma = stationary_state(m).state
    assert not check_detailed_balance(m, sigma).holds
    assert check_detailed_balance(m, sigma, part="dissipative").holds
    m0 = LindbladModel(np.zeros((2, 2)), m.jumps)
    assert check_detailed_balance(m0, sigma).holds
    for model in CATALOG:
        mm = model()
        assert check_detailed_balance(mm, stationary_state(mm).state, part="dissipative").holds


def test_two_qubit_commutant():
    ck = commutant_kernel(two_qubit_lift())
    assert ck.dims == {"ker_ls": 4, "ker_l": 2}
    space = kms_space(DensityMatrix(np.eye(4) / 4))
    expected_ls = np.column_stack([vec(np.kron(I2, p)) for p in (I2, X, Y, Z)])
    expected_l = np.column_stack([vec(np.kron(I2, p)) for p in (I2, X)])
    for basis, exp in ((ck.ker_ls_basis, expected_ls), (ck.ker_l_basis, expected_l)):
        e = space.to_euclidean(exp)
        q = space.to_euclidean(basis)
        p = e @ np.linalg.pinv(e)
        assert np.abs(q - p @ q).max() < 1e-10 and q.shape[1] == e.shape[1]


def test_generator_kernels():
    d = build_lindblad_heisenberg(two_qubit_lift())
    assert d.ker_basis.shape[1] == 4
    assert kernel_basis(d.generator()).shape[1] == 2


@pytest.mark.parametrize("model", CATALOG)
def test_structure(model):
    d = build_lindblad_heisenberg(model(1.3))
    assert symmetry_check(d.l_a).antisymmetric_residual < 1e-10
    assert symmetry_check(d.l_s).symmetric_residual < 1e-10
    assert np.abs(d.generator().matrix @ vec(np.eye(model().dim))).max() == 0


@pytest.mark.parametrize("model", CATALOG)
@given(seed=st.integers(0, 2**31))
def test_trace_preservation_and_duality(model, seed):
    m = model()
    d = m.dim
    rng = np.random.default_rng(seed)
    rho = random_state(rng, d)
    a = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    ls = schrodinger_generator(m)
    lh = heisenberg_generator(m)
    for t in (0.1, 1.0, 10.0):
        rt = unvec(linalg.expm(t * ls) @ vec(rho))
        at = unvec(linalg.expm(t * lh) @ vec(a))
        assert abs(np.trace(rt) - 1) < 1e-9
        assert abs(np.trace(rho @ at) - np.trace(rt @ a)) < 1e-9 * max(1, np.abs(a).max())


@pytest.mark.parametrize("model", CATALOG)
def test_stationarity_residual(model):
    m = model()
    sigma = stationary_state(m).state.matrix
    assert np.abs(schrodinger_generator(m) @ vec(sigma)).max() < 1e-10
