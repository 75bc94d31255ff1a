"""
Flow Poincare functionals evaluated along exact semigroup trajectories.

For ``x_t = exp(t L_gamma) x0`` the time-averaged norm and dissipation

    lhs = (1/T) int_0^T ||x_t||^2 dt,   D = (1/T) int_0^T <x_t, -L_s x_t> dt

are computed by Gauss-Legendre quadrature. The worst ratio ``lhs / D`` over
initial data estimates the inverse flow Poincare constant, which is then
fitted against ``C1 + gamma^2 C2``.
"""

from __future__ import annotations

import warnings
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, optimize

from .hilbert import (
    DEFAULT_TOL,
    GeneratorDecomposition,
    Propagator,
    kernel_basis,
    projector,
)
from .lifting import reference_rate

MIN_QUAD = 16
TRAP_TOL = 1e-14
N_RANDOM = 8


def gauss_legendre(T: float, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights on [0, T], weights normalized to sum to one (time average)."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * T * (x + 1), 0.5 * w


@dataclass(frozen=True)
class FlowSample:
    gamma: float
    horizon_T: float
    lhs: float
    dissipation: float
    ratio: float
    initial_label: str
    degenerate: bool = False

    def to_dict(self) -> dict:
        return asdict(self)


class _Trajectories:
    """Euclidean propagators ``R exp(t L) R^{-1}`` at quadrature nodes, shared across x0."""

    def __init__(self, decomp: GeneratorDecomposition, gamma: float, T: float, quad_n: int, tol=DEFAULT_TOL):
        if T <= 0:
            raise ValueError("T must be positive")
        if quad_n < MIN_QUAD:
            raise ValueError(f"quad_n must be at least {MIN_QUAD}")
        self.decomp = decomp
        self.gamma = float(gamma)
        self.T = float(T)
        self.op = decomp.generator(gamma)
        self.space = decomp.space
        self.t, self.w = gauss_legendre(T, quad_n)
        prop = Propagator(self.op)
        if self.space.is_identity:
            self.E = np.stack([prop.matrix(t) for t in self.t])
        else:
            r, rinv = self.space.chol, self.space.chol_inv
            self.E = np.stack([r @ prop.matrix(t) @ rinv for t in self.t])
        ls = (-decomp.l_s).euclidean
        self.neg_ls = 0.5 * (ls + ls.conj().T)
        ker = kernel_basis(self.op, tol)
        self.p_inf = projector(ker, self.space)
        self.ker_dim = ker.shape[1]

    def project(self, x0: np.ndarray) -> np.ndarray:
        """Remove the ker(L_gamma) component (in the weighted sense)."""
        return x0 - self.p_inf.matrix @ x0

    def states(self, x0: np.ndarray) -> np.ndarray:
        """Euclidean states ``R x_t`` at the nodes, shape (quad_n, n)."""
        y0 = self.space.to_euclidean(x0)
        return np.einsum("kij,j->ki", self.E, y0)

    def quadratic_forms(self) -> tuple[np.ndarray, np.ndarray]:
        """Matrices ``A = avg E^H E`` and ``B = avg E^H (-L_s) E`` in Euclidean coordinates."""
        n = self.space.dim
        A = np.zeros((n, n), dtype=self.E.dtype)
        B = np.zeros_like(A)
        for wk, ek in zip(self.w, self.E):
            eh = wk * ek.conj().T
            A += eh @ ek
            B += eh @ (self.neg_ls @ ek)
        return 0.5 * (A + A.conj().T), 0.5 * (B + B.conj().T)


def _sample(traj: _Trajectories, x0: np.ndarray, label: str) -> FlowSample:
    x = traj.project(np.asarray(x0))
    if traj.space.norm(x) <= 1e-12 * max(traj.space.norm(x0), 1e-300):
        return FlowSample(traj.gamma, traj.T, 0.0, 0.0, float("nan"), label, degenerate=True)
    y = traj.states(x)
    lhs = float(np.sum(traj.w * np.sum(np.abs(y) ** 2, axis=1)))
    dis = float(np.sum(traj.w * np.real(np.einsum("ki,ij,kj->k", y.conj(), traj.neg_ls, y))))
    if dis < TRAP_TOL * lhs:
        raise ValueError("trajectory trapped in ker(L_s)")
    return FlowSample(traj.gamma, traj.T, lhs, max(dis, 0.0), lhs / dis, label)


def extremal_initial(traj: _Trajectories) -> tuple[np.ndarray, float]:
    """Initial datum maximizing ``lhs / D`` over ker(L_gamma)^perp, and that maximum.

    Generalized Hermitian eigenproblem ``A y = r B y`` for the quadrature
    forms restricted to the complement of the kernel.
    """
    A, B = traj.quadratic_forms()
    n = traj.space.dim
    kq = traj.space.to_euclidean(kernel_basis(traj.op))
    W = linalg.null_space(kq.conj().T) if kq.shape[1] else np.eye(n)
    Ar, Br = W.conj().T @ A @ W, W.conj().T @ B @ W
    wb = linalg.eigvalsh(Br)
    if wb[0] <= TRAP_TOL * max(linalg.eigvalsh(Ar)[-1], 1e-300):
        raise ValueError("trajectory trapped in ker(L_s)")
    r, y = linalg.eigh(Ar, Br)
    x = traj.space.from_euclidean(W @ y[:, -1])
    if traj.space.field == "real":
        x = x.real
    return x / traj.space.norm(x), float(r[-1])


def default_initial_set(decomp: GeneratorDecomposition, gamma: float, seed: int = 0,
                        n_random: int = N_RANDOM) -> list[tuple[str, np.ndarray]]:
    """Basis of ker(L_s) projected off ker(L_gamma), plus seeded random vectors."""
    op = decomp.generator(gamma)
    p = projector(kernel_basis(op), decomp.space)
    out = []
    for j in range(decomp.ker_basis.shape[1]):
        b = decomp.ker_basis[:, j]
        x = b - p.matrix @ b
        nrm = decomp.space.norm(x)
        if nrm > 1e-8:
            out.append((f"ker_ls[{j}]", x / nrm))
    rng = np.random.default_rng(seed)
    for j in range(n_random):
        x = rng.standard_normal(decomp.dim)
        if decomp.space.field == "complex":
            x = x + 1j * rng.standard_normal(decomp.dim)
        x = x - p.matrix @ x
        out.append((f"random[{j}]", x / decomp.space.norm(x)))
    return out


def flow_ratio(decomp: GeneratorDecomposition, gamma: float, T: float, x0_set=None,
               quad_n: int = 32, *, seed: int = 0, extremal: bool = True) -> list[FlowSample]:
    """Flow Poincare ratios ``lhs / D`` for each initial datum.

    ``x0_set`` is a list of ``(label, vector)`` pairs or of bare vectors;
    components in ker(L_gamma) are projected out with a warning. The default
    set adds the extremal datum from :func:`extremal_initial`.
    """
    traj = _Trajectories(decomp, gamma, T, quad_n)
    if x0_set is None:
        items = default_initial_set(decomp, gamma, seed)
        if extremal and traj.ker_dim < decomp.dim:
            items.append(("extremal", extremal_initial(traj)[0]))
    else:
        items = [it if isinstance(it, tuple) else (f"x0[{j}]", it) for j, it in enumerate(x0_set)]
    samples = []
    for label, x0 in items:
        x0 = np.asarray(x0)
        removed = traj.space.norm(x0 - traj.project(x0))
        if removed > 1e-10 * max(traj.space.norm(x0), 1e-300):
            warnings.warn(f"{label}: projected off ker(L_gamma) (removed norm {removed:.3e})", stacklevel=2)
        samples.append(_sample(traj, x0, label))
    return samples


def worst_ratio(samples: list[FlowSample]) -> float:
    vals = [s.ratio for s in samples if not s.degenerate]
    if not vals:
        raise ValueError("no non-degenerate flow samples")
    return float(max(vals))


@dataclass(frozen=True)
class SpaceTimeTerms:
    lhs_norm: float
    term1: float
    term2: float
    identity_residual: float

    def to_dict(self) -> dict:
        return asdict(self)


def _inv_sqrt_shift(decomp: GeneratorDecomposition) -> np.ndarray:
    """Euclidean matrix of ``(I - L_s)^{-1/2}``."""
    a = decomp.l_s.euclidean
    w, v = linalg.eigh(0.5 * (a + a.conj().T))
    return (v / np.sqrt(1.0 - w)) @ v.conj().T


def space_time_integrands(decomp: GeneratorDecomposition, gamma: float, x0, times,
                          mean: np.ndarray | None = None) -> dict:
    """Pointwise integrands of the space-time functionals at the given times.

    ``mean`` is the (Euclidean) space-time mean subtracted in the first
    functional; zero by default.
    """
    op = decomp.generator(gamma)
    space = decomp.space
    prop = Propagator(op)
    k = _inv_sqrt_shift(decomp)
    pi_s = decomp.pi_s.euclidean
    la = decomp.l_a.euclidean
    l = op.euclidean
    ls = decomp.l_s.euclidean
    x0 = np.asarray(x0)
    y = np.stack([space.to_euclidean(prop.apply(t, x0)) for t in np.asarray(times, dtype=float)])
    mu = np.zeros(space.dim) if mean is None else mean
    lhs = np.sum(np.abs(y - mu) ** 2, axis=1)
    t1 = np.sum(np.abs(y - y @ pi_s.T) ** 2, axis=1)
    dtf = y @ l.T  # d/dt of the trajectory
    t2 = np.sum(np.abs((dtf - y @ la.T) @ k.T) ** 2, axis=1)
    t2_alt = gamma**2 * np.sum(np.abs(y @ ls.T @ k.T) ** 2, axis=1)
    return {"lhs": lhs, "term1": t1, "term2": t2, "term2_identity": t2_alt}


def space_time_terms(decomp: GeneratorDecomposition, gamma: float, T: float, x0,
                     quad_n: int = 32) -> SpaceTimeTerms:
    """Time-averaged space-time functionals along ``exp(t L_gamma) x0``.

    ``lhs`` subtracts the space-time mean ``P_inf avg_t x_t``; ``term1``
    measures the part off ker(L_s); ``term2`` is
    ``||(I - L_s)^{-1/2} (d/dt - L_a) x_t||^2`` with the time derivative
    taken as ``L_gamma x_t``.
    """
    if quad_n < MIN_QUAD:
        raise ValueError(f"quad_n must be at least {MIN_QUAD}")
    t, w = gauss_legendre(T, quad_n)
    op = decomp.generator(gamma)
    space = decomp.space
    ys = np.stack([space.to_euclidean(v) for v in
                   (Propagator(op).apply(tt, np.asarray(x0)) for tt in t)])
    p_inf = projector(kernel_basis(op), space).euclidean
    mean = p_inf @ (w @ ys)
    f = space_time_integrands(decomp, gamma, x0, t, mean)
    lhs = float(w @ f["lhs"])
    term2 = float(w @ f["term2"])
    alt = float(w @ f["term2_identity"])
    term1 = float(w @ f["term1"])
    if lhs > 0 and term1 < TRAP_TOL * lhs:
        raise ValueError("trajectory trapped in ker(L_s)")
    resid = abs(term2 - alt) / alt if alt > 0 else abs(term2)
    return SpaceTimeTerms(lhs, term1, term2, float(resid))


@dataclass
class RatioFit:
    c1: float
    c2: float
    residual: float
    gamma_grid: np.ndarray
    ratios: np.ndarray

    @property
    def gamma_max(self) -> float:
        return float(np.sqrt(self.c1 / self.c2))

    def predicted_rate(self, gamma):
        g = np.asarray(gamma, dtype=float)
        return g / (self.c1 + g**2 * self.c2)

    @property
    def max_rate(self) -> float:
        return float(self.predicted_rate(self.gamma_max))

    def to_dict(self) -> dict:
        return {
            "C1": self.c1, "C2": self.c2, "gamma_max": self.gamma_max,
            "predicted_max_rate": self.max_rate, "fit_residual": self.residual,
            "gamma_grid": [float(g) for g in self.gamma_grid],
            "worst_ratios": [float(r) for r in self.ratios],
            "predicted_rates": [float(v) for v in self.predicted_rate(self.gamma_grid)],
        }


def fit_ratio_model(gamma_grid, ratios) -> RatioFit:
    """Nonnegative fit of ``ratio(gamma) ~ C1 + gamma^2 C2`` in relative error."""
    g = np.asarray(gamma_grid, dtype=float)
    r = np.asarray(ratios, dtype=float)
    if g.shape != r.shape or g.size < 4:
        raise ValueError("need at least 4 (gamma, ratio) pairs")
    if not (np.all(np.isfinite(r)) and np.all(r > 0)):
        raise ValueError("flow-Poincaré model misfit: ratios must be finite and positive")
    a = np.column_stack([np.ones_like(g), g**2]) / r[:, None]
    (c1, c2), res = optimize.nnls(a, np.ones_like(r))
    if c1 <= 0 or c2 <= 0:
        raise ValueError(
            f"flow-Poincaré model misfit: C1={c1:.3e}, C2={c2:.3e}, relative residual={res:.3e}"
        )
    return RatioFit(float(c1), float(c2), float(res), g, r)


def default_flow_grid(decomp: GeneratorDecomposition, n: int = 9, span: float = 8.0) -> np.ndarray:
    root = np.sqrt(reference_rate(decomp))
    return np.geomspace(root / span, root * span, n)


def default_horizon(decomp: GeneratorDecomposition) -> float:
    return 4.0 / np.sqrt(reference_rate(decomp))


@dataclass
class FlowFit:
    fit: RatioFit
    samples: list = field(default_factory=list)
    horizon_T: float = 0.0

    def to_dict(self) -> dict:
        d = self.fit.to_dict()
        d["horizon_T"] = self.horizon_T
        return d


def fit_constants(decomp: GeneratorDecomposition, gamma_grid=None, T: float | None = None,
                  x0_set=None, quad_n: int = 32, seed: int = 0) -> FlowFit:
    """Worst-case flow Poincare ratios over a friction grid, fitted to ``C1 + gamma^2 C2``."""
    grid = default_flow_grid(decomp) if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    T = default_horizon(decomp) if T is None else float(T)
    samples, worst = [], []
    for g in grid:
        s = flow_ratio(decomp, g, T, x0_set, quad_n, seed=seed)
        samples.extend(s)
        worst.append(worst_ratio(s))
    return FlowFit(fit_ratio_model(grid, worst), samples, T)


@dataclass(frozen=True)
class DecayCheck:
    window_ok: bool
    pointwise_ok: bool
    window_violation: float
    pointwise_violation: float

    @property
    def passed(self) -> bool:
        return self.window_ok and self.pointwise_ok

    def to_dict(self) -> dict:
        d = asdict(self)
        d["passed"] = self.passed
        return d


def verify_decay(decomp: GeneratorDecomposition, gamma: float, nu: float, T: float,
                 x0_set=None, quad_n: int = 32, n_times: int = 201, slack: float = 1e-9,
                 seed: int = 0) -> DecayCheck:
    """Check the windowed and pointwise exponential decay bounds at rate ``nu``.

    Window: ``avg_{[t, t+T]} ||x_s||^2 <= e^{-2 nu t} ||x0||^2``.
    Pointwise: ``||x_t|| <= e^{nu T} e^{-nu t} ||x0||``.
    Times run over ``[0, 10/nu]`` (``[0, 10 T]`` when ``nu = 0``).
    """
    if nu < 0:
        raise ValueError("nu must be nonnegative")
    traj = _Trajectories(decomp, gamma, T, quad_n)
    if x0_set is None:
        items = [x for _, x in default_initial_set(decomp, gamma, seed)]
    else:
        items = [it[1] if isinstance(it, tuple) else it for it in x0_set]
    t_end = 10.0 / nu if nu > 0 else 10.0 * T
    times = np.linspace(0.0, t_end, n_times)
    prop = Propagator(traj.op)
    space = traj.space
    cols = []
    for x0 in items:
        x = traj.project(np.asarray(x0))
        n0 = space.norm(x)
        if n0 > 0:
            cols.append(x / n0)
    if not cols:
        return DecayCheck(True, True, 0.0, 0.0)
    X = np.column_stack(cols)
    wv = pv = 0.0
    for t in times:
        xt = prop.matrix(t) @ X
        y = np.einsum("kij,jl->kil", traj.E, space.to_euclidean(xt))
        window = np.einsum("k,kil->l", traj.w, np.abs(y) ** 2)
        wv = max(wv, float(window.max()) - np.exp(-2 * nu * t) - slack)
        pv = max(pv, float(space.norms(xt).max()) - np.exp(nu * (T - t)) - slack)
    return DecayCheck(wv <= 0, pv <= 0, float(max(wv, 0.0)), float(max(pv, 0.0)))
