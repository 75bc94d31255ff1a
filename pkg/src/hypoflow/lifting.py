"""
Lifting hypotheses, the overdamped-limit generator, friction scans and rate bounds.

Reduced operators on ker(L_s) are expressed in the coordinates of the
decomposition's gram-orthonormal ``ker_basis``; their space is Euclidean.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import linalg, optimize

from .hilbert import (
    DEFAULT_TOL,
    GeneratorDecomposition,
    LinOp,
    NumericalError,
    WeightedSpace,
    adjoint,
    decay_prefactor,
    euclidean_kernel,
    kernel_basis,
    pseudo_inverse,
    singular_value_gap,
    spectral_gap,
    subspace_distance,
    symmetry_check,
)

PHP_TOL = 1e-8
PREFACTOR_MARGIN = 1.05


def _scale(op: LinOp) -> float:
    return max(op.norm(), 1.0)


def php_residual(decomp: GeneratorDecomposition) -> float:
    """``||Pi_s L_a Pi_s||`` in the weighted operator norm."""
    return (decomp.pi_s @ decomp.l_a @ decomp.pi_s).norm()


def default_s_op(decomp: GeneratorDecomposition) -> LinOp:
    """``(-L_s)^+``: the overdamped-limit choice of S, zero on ker(L_s)."""
    return pseudo_inverse(-decomp.l_s)


def collapsed_generator(decomp: GeneratorDecomposition, s_op: LinOp | None = None) -> LinOp:
    """``-(L_a Pi_s)* S (L_a Pi_s)`` reduced to ker(L_s) coordinates (no solvability check)."""
    s_op = default_s_op(decomp) if s_op is None else s_op
    lap = decomp.l_a @ decomp.pi_s
    full = -(adjoint(lap) @ s_op @ lap)
    b = decomp.ker_basis
    red = b.conj().T @ decomp.space.gram @ full.matrix @ b
    red = 0.5 * (red + red.conj().T)
    field = decomp.space.field
    if field == "complex" and np.abs(red.imag).max(initial=0) < 1e-13 * max(1.0, np.abs(red).max(initial=0)):
        red = red.real
        field = "real"
    elif field == "real":
        red = red.real
    return LinOp(red, WeightedSpace.euclidean(b.shape[1], field))


def overdamped_limit(decomp: GeneratorDecomposition) -> LinOp:
    """Effective generator ``L_O = -(L_a Pi_s)* (-L_s)^{-1} (L_a Pi_s)`` on ker(L_s).

    Requires ran(L_a Pi_s) inside ran(L_s), checked both as
    ``||Pi_s L_a Pi_s|| < 1e-8`` and ``||(I - L_s L_s^+) L_a Pi_s|| < 1e-8``
    (relative to max(1, ||L_a||)).
    """
    scale = _scale(decomp.l_a)
    lap = decomp.l_a @ decomp.pi_s
    range_res = ((LinOp.identity(decomp.space) - decomp.l_s @ pseudo_inverse(decomp.l_s)) @ lap).norm()
    if php_residual(decomp) / scale >= PHP_TOL or range_res / scale >= PHP_TOL:
        raise ValueError("range condition fails: not a second-order lift")
    l_o = collapsed_generator(decomp)
    rep = symmetry_check(l_o)
    if l_o.norm() > 0 and rep.symmetric_residual >= 1e-9:
        raise NumericalError(f"overdamped generator not symmetric ({rep.symmetric_residual:.2e})")
    return l_o


def _gap_or_none(op: LinOp, tol=DEFAULT_TOL) -> float | None:
    if op.dim == 0 or op.norm() == 0:
        return None
    try:
        return spectral_gap(op, tol).gap
    except NumericalError:
        return None


@dataclass(frozen=True)
class LiftReport:
    php_residual: float
    coercivity_lambda_s: float
    kernel_equal: bool
    second_order_residual: float
    first_order_residual: float
    s_tilde_m: float
    kernel_strict: bool
    coercive: bool
    overdamped_gap: float | None
    ker_ls_dim: int
    ker_l_dim: int
    gamma: float

    def to_dict(self) -> dict:
        return asdict(self)


def coercivity_constant(decomp: GeneratorDecomposition) -> float:
    """Smallest positive eigenvalue of -L_s (gap of L_s on ker(L_s)^perp)."""
    a = (-decomp.l_s).euclidean
    w = linalg.eigvalsh(0.5 * (a + a.conj().T))
    pos = w[w > DEFAULT_TOL * max(np.abs(w).max(), 1e-300)]
    return float(pos.min()) if pos.size else 0.0


def _complement(basis_e: np.ndarray, n: int) -> np.ndarray:
    """Euclidean orthonormal basis of the orthogonal complement of span(basis_e)."""
    if basis_e.shape[1] == 0:
        return np.eye(n)
    return euclidean_kernel(basis_e.conj().T) if basis_e.shape[1] < n else np.zeros((n, 0))


def s_tilde_m(decomp: GeneratorDecomposition, s_op: LinOp | None = None,
              gamma: float | None = None, rank_tol: float = DEFAULT_TOL) -> float:
    """Smallest singular value of ``Pi_1 S Pi_1`` on the range of ``Pi_1``.

    ``Pi_1`` projects onto ran(L restricted to ker(L_s)), found by a
    rank-revealing SVD with relative tolerance ``rank_tol``.
    """
    s_op = default_s_op(decomp) if s_op is None else s_op
    space = decomp.space
    image = space.to_euclidean(decomp.generator(gamma).matrix @ decomp.ker_basis)
    if image.size == 0:
        return 0.0
    u, s, _ = linalg.svd(image, full_matrices=False)
    if s.size == 0 or s[0] == 0:
        return 0.0
    q = u[:, s > rank_tol * s[0]]
    m = q.conj().T @ s_op.euclidean @ q
    return float(linalg.svdvals(m).min())


def check_lift_conditions(
    decomp: GeneratorDecomposition, s_op: LinOp | None = None,
    gamma: float | None = None, tol: float = DEFAULT_TOL,
) -> LiftReport:
    """Evaluate the second-order lifting hypotheses for ``L_gamma`` over ker(L_s)."""
    gamma = decomp.gamma if gamma is None else gamma
    space = decomp.space
    s_op = default_s_op(decomp) if s_op is None else s_op
    b = decomp.ker_basis
    b_e = space.to_euclidean(b)
    comp = _complement(b_e, decomp.dim)
    if comp.shape[1]:
        s_e = s_op.euclidean
        s_r = comp.conj().T @ s_e @ comp
        w = linalg.eigvalsh(0.5 * (s_r + s_r.conj().T))
        if w[0] < -tol * max(1.0, np.abs(w).max()):
            raise ValueError("S not positive")

    l_gamma = decomp.generator(gamma)
    l_o = collapsed_generator(decomp, s_op)
    lb = l_gamma.matrix @ b
    second = lb.conj().T @ space.gram @ s_op.matrix @ lb + l_o.matrix
    first = b.conj().T @ space.gram @ lb + l_o.matrix

    ker_l = kernel_basis(l_gamma, tol)
    ker_o = b @ kernel_basis(l_o, tol) if l_o.norm() > 0 else b
    same_dim = ker_o.shape[1] == ker_l.shape[1]
    kernel_equal = bool(same_dim and subspace_distance(ker_o, ker_l, space) < 1e-6)

    return LiftReport(
        php_residual=php_residual(decomp),
        coercivity_lambda_s=coercivity_constant(decomp),
        kernel_equal=kernel_equal,
        second_order_residual=float(np.abs(second).max(initial=0.0)),
        first_order_residual=float(linalg.norm(first, 2)) if first.size else 0.0,
        s_tilde_m=s_tilde_m(decomp, s_op, gamma),
        kernel_strict=ker_l.shape[1] < b.shape[1],
        coercive=ker_l.shape[1] == b.shape[1],
        overdamped_gap=_gap_or_none(l_o),
        ker_ls_dim=b.shape[1],
        ker_l_dim=ker_l.shape[1],
        gamma=float(gamma),
    )


def reference_rate(decomp: GeneratorDecomposition) -> float:
    """lambda_O for hypocoercive decompositions, lambda_S for coercive ones."""
    lam = _gap_or_none(collapsed_generator(decomp))
    return lam if lam is not None else coercivity_constant(decomp)


def default_gamma_grid(decomp: GeneratorDecomposition, n: int = 48, span: float = 16.0) -> np.ndarray:
    root = np.sqrt(reference_rate(decomp))
    return np.geomspace(root / span, root * span, n)


def default_t_grid(nu0: float, n: int = 64) -> np.ndarray:
    return np.geomspace(1e-3 / nu0, 20.0 / nu0, n)


@dataclass
class RateReport:
    gamma_grid: np.ndarray
    spectral_gaps: np.ndarray
    singular_gaps: np.ndarray
    prefactors: np.ndarray
    argmax_gamma: float
    max_gap: float
    overdamped_gap: float | None
    upper_bound: float | None
    upper_bounds: np.ndarray | None = None
    s_tilde_m: float | None = None
    refined_gamma: float | None = None
    refined_gap: float | None = None
    t_grid_rule: dict = field(default_factory=lambda: {"start": "1e-3/nu0", "stop": "20/nu0", "n": 64, "spacing": "log", "includes_zero": True})

    @property
    def prefactors_with_margin(self) -> np.ndarray:
        return PREFACTOR_MARGIN * self.prefactors

    def rows(self) -> list[dict]:
        out = []
        for i, g in enumerate(self.gamma_grid):
            out.append({
                "gamma": float(g),
                "spectral_gap": float(self.spectral_gaps[i]),
                "singular_gap": float(self.singular_gaps[i]),
                "prefactor": float(self.prefactors[i]),
                "prefactor_with_margin": float(self.prefactors_with_margin[i]),
                "upper_bound": None if self.upper_bounds is None else float(self.upper_bounds[i]),
            })
        return out

    def to_dict(self) -> dict:
        return {
            "gamma_grid": [float(g) for g in self.gamma_grid],
            "spectral_gaps": [float(x) for x in self.spectral_gaps],
            "singular_gaps": [float(x) for x in self.singular_gaps],
            "prefactors": [float(x) for x in self.prefactors],
            "prefactors_with_margin": [float(x) for x in self.prefactors_with_margin],
            "argmax_gamma": float(self.argmax_gamma),
            "max_gap": float(self.max_gap),
            "overdamped_gap": self.overdamped_gap,
            "s_tilde_m": self.s_tilde_m,
            "upper_bound": self.upper_bound,
            "upper_bounds": None if self.upper_bounds is None else [float(x) for x in self.upper_bounds],
            "refined_gamma": self.refined_gamma,
            "refined_gap": self.refined_gap,
            "t_grid_rule": self.t_grid_rule,
        }


def _workers() -> int:
    env = os.environ.get("HYPOFLOW_THREADS")
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            raise ValueError(f"HYPOFLOW_THREADS must be an integer, got {env!r}") from None
    return 1


def _scan_point(decomp, gamma, t_grid, with_prefactor, tol):
    l = decomp.generator(gamma)
    nu0 = spectral_gap(l, tol).gap
    sg = singular_value_gap(l, tol)
    c = np.nan
    if with_prefactor:
        times = default_t_grid(nu0) if t_grid is None else np.asarray(t_grid)
        c = decay_prefactor(l, nu0, times, tol)
    return nu0, sg, c


def rate_scan(
    decomp: GeneratorDecomposition, gamma_grid=None, t_grid=None, *,
    with_prefactor: bool = True, refine: bool = True, workers: int | None = None,
    tol: float = DEFAULT_TOL,
) -> RateReport:
    """Spectral gap, singular-value gap and prefactor of ``L_a + gamma L_s`` over a grid.

    With ``refine`` the grid argmax is polished by bounded scalar
    maximization of the spectral gap between its two grid neighbours.
    """
    grid = default_gamma_grid(decomp) if gamma_grid is None else np.asarray(gamma_grid, dtype=float)
    if grid.size == 0 or np.any(grid <= 0):
        raise ValueError("gamma grid must be non-empty and positive")
    workers = _workers() if workers is None else workers
    args = [(decomp, g, t_grid, with_prefactor, tol) for g in grid]
    if workers > 1:
        with ThreadPoolExecutor(workers) as ex:
            results = list(ex.map(lambda a: _scan_point(*a), args))
    else:
        results = [_scan_point(*a) for a in args]
    gaps, sgaps, pref = (np.array(x) for x in zip(*results))
    k = int(np.argmax(gaps))

    refined_gamma = refined_gap = None
    if refine and grid.size >= 3:
        lo = grid[max(k - 1, 0)]
        hi = grid[min(k + 1, grid.size - 1)]
        res = optimize.minimize_scalar(
            lambda g: -spectral_gap(decomp.generator(g), tol).gap,
            bounds=(lo, hi), method="bounded", options={"xatol": 1e-12 * hi, "maxiter": 500},
        )
        refined_gamma, refined_gap = float(res.x), float(-res.fun)
        if refined_gap < gaps[k]:
            refined_gamma, refined_gap = float(grid[k]), float(gaps[k])

    lam_o = _gap_or_none(collapsed_generator(decomp))
    stm = s_tilde_m(decomp) if lam_o is not None else None
    ub = ubs = None
    if lam_o is not None and stm and stm > DEFAULT_TOL and with_prefactor:
        ubs = (1 + np.log(pref)) * np.sqrt(lam_o / stm)
        ub = float(ubs[k])
    return RateReport(grid, gaps, sgaps, pref, float(grid[k]), float(gaps[k]),
                      lam_o, ub, ubs, stm, refined_gamma, refined_gap)


def upper_bound(decomp: GeneratorDecomposition, s_op: LinOp | None = None, prefactor_C: float = 1.0) -> float:
    """``(1 + log C) sqrt(lambda_O / s_tilde_m)``: ceiling on any rate with prefactor C."""
    if prefactor_C < 1:
        raise ValueError("prefactor must be at least 1")
    lam_o = _gap_or_none(collapsed_generator(decomp, s_op))
    stm = s_tilde_m(decomp, s_op)
    if lam_o is None or stm <= DEFAULT_TOL:
        raise ValueError("upper bound degenerate")
    return float((1 + np.log(prefactor_C)) * np.sqrt(lam_o / stm))


@dataclass(frozen=True)
class RateBoundCheck:
    upper_bound_ok: np.ndarray | None
    gap_bound_ok: np.ndarray
    gap_bounds: np.ndarray

    @property
    def all_ok(self) -> bool:
        ok = bool(np.all(self.gap_bound_ok))
        if self.upper_bound_ok is not None:
            ok = ok and bool(np.all(self.upper_bound_ok))
        return ok


def check_rate_bounds(report: RateReport, rtol: float = 1e-6) -> RateBoundCheck:
    """Pointwise ``nu0 <= (1 + log C) s(L)`` and, when defined, the upper-bound ceiling."""
    bound = (1 + np.log(report.prefactors)) * report.singular_gaps
    gap_bound_ok = report.spectral_gaps <= bound * (1 + rtol)
    ub_ok = None
    if report.upper_bounds is not None:
        ub_ok = report.spectral_gaps <= report.upper_bounds * (1 + rtol)
    return RateBoundCheck(ub_ok, gap_bound_ok, bound)


def langevin_rate(m: float, gamma: float, c: float = 1.0) -> float:
    """Hypocoercive Langevin rate ``m gamma / (c (sqrt(m) + gamma)^2)``."""
    if min(m, gamma, c) <= 0:
        raise ValueError("parameters must be positive")
    return m * gamma / (c * (np.sqrt(m) + gamma) ** 2)


def quantum_rate(lambda_s: float, c1: float, c2: float, gamma: float) -> float:
    """Lindblad rate ``gamma lambda / (C1^2 + gamma^2 lambda C2^2)``."""
    if min(lambda_s, c1, c2, gamma) <= 0:
        raise ValueError("parameters must be positive")
    return gamma * lambda_s / (c1**2 + gamma**2 * lambda_s * c2**2)


def model_rate_formulas(kind: str, **params) -> float:
    if kind == "langevin":
        return langevin_rate(params["m"], params["gamma"], params.get("c", 1.0))
    if kind == "quantum":
        return quantum_rate(params["lambda_s"], params["c1"], params["c2"], params["gamma"])
    raise ValueError(f"unknown formula kind {kind!r}")
