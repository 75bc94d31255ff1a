"""
Finite-dimensional Lindbladians in the Heisenberg picture under the KMS geometry.

Vectorization is column stacking, ``vec(X) = X.reshape(-1, order="F")``, so the
superoperator of ``X -> A X B`` is ``kron(B.T, A)``.

The dissipative part uses the commutator form
``L_s(A) = sum_j L_j^H [A, L_j] + [L_j^H, A] L_j = sum_j 2 L_j^H A L_j - {L_j^H L_j, A}``,
and the Schrodinger-picture generator is its Hilbert-Schmidt adjoint.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy import linalg

from .hilbert import (
    DEFAULT_TOL,
    GeneratorDecomposition,
    LinOp,
    NumericalError,
    WeightedSpace,
    euclidean_kernel,
    kernel_basis,
    orthonormalize,
    subspace_distance,
    symmetry_check,
)

KMS_SYMMETRY_TOL = 1e-8

PAULI = {
    "I": np.eye(2, dtype=complex),
    "X": np.array([[0, 1], [1, 0]], dtype=complex),
    "Y": np.array([[0, -1j], [1j, 0]], dtype=complex),
    "Z": np.array([[1, 0], [0, -1]], dtype=complex),
}
# |0> = (1, 0) is the +1 eigenvector of Z
SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)
SIGMA_MINUS = np.array([[0, 0], [1, 0]], dtype=complex)


def pauli_operator(label: str, n_qubits: int | None = None) -> np.ndarray:
    """Pauli string to matrix.

    ``"XZ"`` is a full string (qubit 1 leftmost). ``"Z1"`` / ``"X2"`` place a
    single Pauli on a 1-based qubit index; ``n_qubits`` is then required.
    """
    label = label.strip().upper()
    if len(label) >= 2 and label[0] in PAULI and label[1:].isdigit():
        if n_qubits is None:
            raise ValueError(f"Pauli label {label!r} needs the number of qubits")
        q = int(label[1:])
        if not 1 <= q <= n_qubits:
            raise ValueError(f"qubit index {q} out of range")
        label = "I" * (q - 1) + label[0] + "I" * (n_qubits - q)
    if not label or any(ch not in PAULI for ch in label):
        raise ValueError(f"invalid Pauli string {label!r}")
    if n_qubits is not None and len(label) != n_qubits:
        raise ValueError(f"Pauli string {label!r} does not act on {n_qubits} qubits")
    out = np.eye(1, dtype=complex)
    for ch in label:
        out = np.kron(out, PAULI[ch])
    return out


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1, order="F")


def unvec(v: np.ndarray, d: int | None = None) -> np.ndarray:
    v = np.asarray(v)
    d = d or int(round(np.sqrt(v.size)))
    return v.reshape(d, d, order="F")


def spre(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> a X``."""
    return np.kron(np.eye(a.shape[0]), a)


def spost(b: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> X b``."""
    return np.kron(b.T, np.eye(b.shape[0]))


def commutator_super(a: np.ndarray) -> np.ndarray:
    """Superoperator of ``X -> [a, X]``."""
    return spre(a) - spost(a)


@dataclass(frozen=True, eq=False)
class LindbladModel:
    hamiltonian: np.ndarray
    jumps: tuple
    gamma: float = 1.0
    name: str = ""

    def __post_init__(self):
        h = np.asarray(self.hamiltonian, dtype=complex)
        if h.ndim != 2 or h.shape[0] != h.shape[1]:
            raise ValueError("Hamiltonian must be square")
        if linalg.norm(h - h.conj().T) > 1e-12 * max(1.0, linalg.norm(h)):
            raise ValueError("Hamiltonian is not Hermitian")
        jumps = tuple(np.asarray(j, dtype=complex) for j in self.jumps)
        if not jumps:
            raise ValueError("at least one jump operator is required")
        if any(j.shape != h.shape for j in jumps):
            raise ValueError("jump operators must match the Hamiltonian dimension")
        if not (np.isfinite(self.gamma) and self.gamma > 0):
            raise ValueError("gamma must be positive")
        object.__setattr__(self, "hamiltonian", 0.5 * (h + h.conj().T))
        object.__setattr__(self, "jumps", jumps)

    @property
    def dim(self) -> int:
        return self.hamiltonian.shape[0]


@dataclass(frozen=True, eq=False)
class DensityMatrix:
    matrix: np.ndarray

    def __post_init__(self):
        r = np.asarray(self.matrix, dtype=complex)
        if r.ndim != 2 or r.shape[0] != r.shape[1]:
            raise ValueError("density matrix must be square")
        if linalg.norm(r - r.conj().T) > 1e-10:
            raise ValueError("density matrix is not Hermitian")
        r = 0.5 * (r + r.conj().T)
        if abs(np.trace(r) - 1) > 1e-12:
            raise ValueError("density matrix must have unit trace")
        if linalg.eigvalsh(r)[0] < -1e-12:
            raise ValueError("density matrix is not positive semidefinite")
        object.__setattr__(self, "matrix", r)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @classmethod
    def maximally_mixed(cls, d: int) -> "DensityMatrix":
        return cls(np.eye(d) / d)


def heisenberg_hamiltonian(h: np.ndarray) -> np.ndarray:
    """Matrix of ``A -> i [H, A]``."""
    return 1j * commutator_super(h)


def heisenberg_dissipator(jumps: Sequence[np.ndarray]) -> np.ndarray:
    """Matrix of ``A -> sum_j L_j^H [A, L_j] + [L_j^H, A] L_j``."""
    d = jumps[0].shape[0]
    out = np.zeros((d * d, d * d), dtype=complex)
    for lj in jumps:
        ld = lj.conj().T
        ldl = ld @ lj
        out += 2 * np.kron(lj.T, ld) - spre(ldl) - spost(ldl)
    return out


def schrodinger_generator(model: LindbladModel) -> np.ndarray:
    """Matrix of ``rho -> -i[H, rho] + gamma sum_j [L_j rho, L_j^H] + [L_j, rho L_j^H]``."""
    h = model.hamiltonian
    out = -1j * commutator_super(h)
    for lj in model.jumps:
        ld = lj.conj().T
        ldl = ld @ lj
        out = out + model.gamma * (2 * np.kron(lj.conj(), lj) - spre(ldl) - spost(ldl))
    return out


def heisenberg_generator(model: LindbladModel) -> np.ndarray:
    return heisenberg_hamiltonian(model.hamiltonian) + model.gamma * heisenberg_dissipator(model.jumps)


@dataclass(frozen=True)
class StationaryResult:
    state: DensityMatrix
    unique: bool
    full_rank: bool
    kernel_dim: int
    residual: float


def stationary_state(model: LindbladModel, tol: float = DEFAULT_TOL) -> StationaryResult:
    """Stationary state from the kernel of the Schrodinger-picture generator.

    With a degenerate kernel the returned state is the Hilbert-Schmidt
    projection of the maximally mixed state onto it.
    """
    d = model.dim
    s = schrodinger_generator(model)
    null = euclidean_kernel(s, tol)
    k = null.shape[1]
    if k == 0:
        raise NumericalError("no stationary state at tolerance")
    target = vec(np.eye(d) / d)
    rho = unvec(null @ (null.conj().T @ target), d)
    rho = 0.5 * (rho + rho.conj().T)
    tr = np.trace(rho).real
    if abs(tr) < 1e-12:
        raise NumericalError("kernel element not a state")
    rho = rho / tr
    w = linalg.eigvalsh(rho)
    if w[0] < -max(tol, 1e-12):
        raise NumericalError("kernel element not a state")
    residual = float(linalg.norm(s @ vec(rho)))
    return StationaryResult(DensityMatrix(rho), k == 1, bool(w[0] > tol), k, residual)


def _sqrt_state(sigma: DensityMatrix, floor: float = 1e-12) -> np.ndarray:
    w, v = linalg.eigh(sigma.matrix)
    if w[0] <= floor:
        raise ValueError("KMS requires full-rank state")
    return (v * np.sqrt(w)) @ v.conj().T


def kms_space(sigma: DensityMatrix) -> WeightedSpace:
    """Space of vectorized operators with ``<A, B> = tr(s A^H s B)``, ``s = sigma^{1/2}``."""
    s = _sqrt_state(sigma)
    return WeightedSpace(np.kron(s.T, s), "complex")


def kms_inner(a: np.ndarray, b: np.ndarray, sigma: DensityMatrix) -> complex:
    s = _sqrt_state(sigma)
    return complex(np.trace(s @ a.conj().T @ s @ b))


def build_lindblad_heisenberg(
    model: LindbladModel, sigma: DensityMatrix | None = None, tol: float = DEFAULT_TOL
) -> GeneratorDecomposition:
    """``L = i[H, .] + gamma L_s`` on the KMS space of ``sigma``.

    Raises ``ValueError`` when the KMS (anti)symmetry of the two parts fails.
    """
    if sigma is None:
        sigma = stationary_state(model, tol).state
    if sigma.dim != model.dim:
        raise ValueError("state dimension does not match model")
    space = kms_space(sigma)
    l_a = LinOp(heisenberg_hamiltonian(model.hamiltonian), space)
    l_s = LinOp(heisenberg_dissipator(model.jumps), space)
    anti = symmetry_check(l_a).antisymmetric_residual
    sym = symmetry_check(l_s).symmetric_residual
    if anti >= KMS_SYMMETRY_TOL or sym >= KMS_SYMMETRY_TOL:
        raise ValueError(
            f"model violates KMS (anti)symmetry assumptions (L_a: {anti:.2e}, L_s: {sym:.2e})"
        )
    return GeneratorDecomposition.from_operators(
        l_a, l_s, model.gamma, label=model.name or f"lindblad[d={model.dim}]", tol=tol
    )


@dataclass(frozen=True)
class DetailedBalance:
    holds: bool
    residual: float


def check_detailed_balance(
    model: LindbladModel, sigma: DensityMatrix, tol: float = 1e-8, part: str = "full"
) -> DetailedBalance:
    """sigma-KMS detailed balance: self-adjointness of the generator in the KMS metric.

    ``part`` selects the full generator or only the dissipative part.
    """
    space = kms_space(sigma)
    if part == "full":
        m = heisenberg_generator(model)
    elif part == "dissipative":
        m = heisenberg_dissipator(model.jumps)
    else:
        raise ValueError(f"unknown part {part!r}")
    res = symmetry_check(LinOp(m, space)).symmetric_residual
    return DetailedBalance(res < tol, res)


@dataclass(frozen=True, eq=False)
class CommutantKernels:
    ker_ls_basis: np.ndarray
    ker_l_basis: np.ndarray
    mismatch: dict = field(default_factory=dict)

    @property
    def dims(self) -> dict:
        return {"ker_ls": self.ker_ls_basis.shape[1], "ker_l": self.ker_l_basis.shape[1]}


def commutant_kernel(
    model: LindbladModel, sigma: DensityMatrix | None = None, tol: float = DEFAULT_TOL
) -> CommutantKernels:
    """Kernels of L_s and L from commutation relations, cross-checked against the generators.

    ker(L_s) = {A : [L_j, A] = [L_j^H, A] = 0}; ker(L) additionally needs [H, A] = 0.
    Bases are KMS-orthonormal.
    """
    if sigma is None:
        sigma = stationary_state(model, tol).state
    space = kms_space(sigma)
    maps = []
    for lj in model.jumps:
        maps += [commutator_super(lj), commutator_super(lj.conj().T)]
    scale = max(max(linalg.norm(m, 2) for m in maps), 1e-300)
    stacked = np.vstack(maps) / scale
    ker_ls = orthonormalize(euclidean_kernel(stacked, tol), space)
    with_h = np.vstack(maps + [commutator_super(model.hamiltonian)])
    with_h = with_h / max(linalg.norm(with_h, 2), 1e-300)
    ker_l = orthonormalize(euclidean_kernel(with_h, tol), space)

    # ker_l inside ker_ls
    p = space.to_euclidean(ker_ls)
    q = space.to_euclidean(ker_l)
    leak = float(linalg.norm(q - p @ (p.conj().T @ q), 2)) if q.size else 0.0

    decomp = build_lindblad_heisenberg(model, sigma, tol)
    gen_ls = kernel_basis(decomp.l_s, tol)
    gen_l = kernel_basis(decomp.generator(), tol)
    mismatch = {
        "ker_l_in_ker_ls": leak,
        "ker_ls": subspace_distance(ker_ls, gen_ls, space) if gen_ls.shape[1] == ker_ls.shape[1] else np.inf,
        "ker_l": subspace_distance(ker_l, gen_l, space) if gen_l.shape[1] == ker_l.shape[1] else np.inf,
    }
    if max(mismatch.values()) > tol:
        raise NumericalError(f"kernel characterization violated: {mismatch}")
    return CommutantKernels(ker_ls, ker_l, mismatch)


def thermal_qubit(gamma: float = 1.0) -> LindbladModel:
    """Qubit with H = Z/2 and Davies-type jumps at inverse-temperature ratio 1/2."""
    return LindbladModel(
        0.5 * PAULI["Z"],
        (np.sqrt(2 / 3) * SIGMA_MINUS, np.sqrt(1 / 3) * SIGMA_PLUS),
        gamma,
        name="thermal-qubit",
    )


def two_qubit_lift(gamma: float = 1.0) -> LindbladModel:
    """H = X (x) X, jumps X (x) I and Z (x) I: dissipation acts on qubit 1 only."""
    return LindbladModel(
        pauli_operator("XX"),
        (pauli_operator("XI"), pauli_operator("ZI")),
        gamma,
        name="two-qubit",
    )


def pauli_basis(n_qubits: int) -> tuple[list[str], np.ndarray]:
    labels = ["".join(p) for p in itertools.product("IXYZ", repeat=n_qubits)]
    return labels, np.stack([vec(pauli_operator(lab)) for lab in labels], 1)
