"""
Acceptance suite. Each criterion prints one PASS/FAIL line with its runtime
and asserts both the numerical check and the time budget.
"""

import time

import numpy as np
from scipy import linalg

from hypoflow.catalog import LISTED, ModelParams, load_model
from hypoflow.classical import PotentialSpec, build_langevin
from hypoflow.flow import fit_constants, fit_ratio_model, verify_decay
from hypoflow.hilbert import (
    kernel_basis,
    kernel_intersection,
    projector,
    relaxation_time,
    semigroup_decay,
    spectral_gap,
    subspace_distance,
    symmetry_check,
)
from hypoflow.lifting import (
    check_rate_bounds,
    default_gamma_grid,
    overdamped_limit,
    php_residual,
    rate_scan,
)
from hypoflow.quantum import (
    PAULI,
    build_lindblad_heisenberg,
    schrodinger_generator,
    stationary_state,
    thermal_qubit,
    two_qubit_lift,
    unvec,
    vec,
)
from hypoflow.sde import SimConfig, estimate_decay_rate, simulate_langevin, simulate_overdamped


def report(label, ok, elapsed, limit, detail=""):
    passed = bool(ok) and elapsed < limit
    print(f"\n{'PASS' if passed else 'FAIL'} {label}: {detail} [{elapsed:.1f}s / {limit:.0f}s]")
    assert ok, detail
    assert elapsed < limit, f"runtime {elapsed:.1f}s exceeds {limit}s"


def catalog_models():
    return {name: load_model(name, ModelParams()) for name in LISTED}


def test_criterion_1_structural_invariants():
    t0 = time.perf_counter()
    worst = {"sym": 0.0, "php": 0.0, "ker": 0.0}
    poincare_ok = True
    rng = np.random.default_rng(1)
    for name, d in catalog_models().items():
        scale = max(d.l_a.norm(), d.l_s.norm(), 1.0)
        worst["sym"] = max(worst["sym"], symmetry_check(d.l_a).antisymmetric_residual / scale,
                           symmetry_check(d.l_s).symmetric_residual / scale)
        worst["php"] = max(worst["php"], php_residual(d) / scale)
        k_l = kernel_basis(d.generator())
        k_int = kernel_intersection([d.l_a, d.l_s])
        if k_l.shape[1] != k_int.shape[1]:
            worst["ker"] = np.inf
        else:
            worst["ker"] = max(worst["ker"], subspace_distance(k_l, k_int, d.space))
        # ||(I - Pi_s) f||^2 <= <f, -L_s f> on 100 random vectors
        f = rng.standard_normal((d.dim, 100))
        if d.space.field == "complex":
            f = f + 1j * rng.standard_normal((d.dim, 100))
        off = f - d.pi_s.matrix @ f
        lhs = d.space.norms(off) ** 2
        rhs = np.real(np.sum(f.conj() * (d.space.gram @ (-d.l_s.matrix @ f)), axis=0))
        poincare_ok &= bool(np.all(lhs <= rhs * (1 + 1e-10) + 1e-12))
    ok = worst["sym"] < 1e-10 and worst["php"] < 1e-10 and worst["ker"] < 1e-8 and poincare_ok
    report("criterion 1 structural invariants", ok, time.perf_counter() - t0, 10,
           f"sym={worst['sym']:.1e} php={worst['php']:.1e} ker_dist={worst['ker']:.1e} poincare={poincare_ok}")


def _two_qubit_brute_force():
    """L_O on the commutant I (x) M_2 from -1/4 [X, [X, B]], in the KMS-orthonormal basis I (x) P."""
    X = PAULI["X"]
    basis = [np.kron(PAULI["I"], p) for p in (PAULI["I"], PAULI["X"], PAULI["Y"], PAULI["Z"])]

    def apply(a):
        b = a[:2, :2]
        c = X @ b - b @ X
        return np.kron(PAULI["I"], -0.25 * (X @ c - c @ X))

    mat = np.array([[np.trace(bi.conj().T @ apply(bj)) / 4 for bj in basis] for bi in basis])
    return np.column_stack([vec(b) for b in basis]), mat


def test_criterion_2_overdamped_limit():
    t0 = time.perf_counter()
    errs = []
    for m in (0.01, 0.04, 0.16, 1.0):
        d = build_langevin(PotentialSpec.quadratic(m), 16, 16)
        errs.append(abs(spectral_gap(overdamped_limit(d)).gap - m))
    d = build_lindblad_heisenberg(two_qubit_lift())
    lo = overdamped_limit(d)
    B, oracle = _two_qubit_brute_force()
    g = d.space.gram
    full = d.ker_basis @ lo.matrix @ d.ker_basis.conj().T @ g
    full_oracle = B @ oracle @ B.conj().T @ g
    qerr = float(np.abs(full - full_oracle).max())
    ok = max(errs) < 1e-6 and qerr < 1e-8
    report("criterion 2 overdamped limit", ok, time.perf_counter() - t0, 30,
           f"max |gap - m|={max(errs):.1e} two-qubit brute-force diff={qerr:.1e}")


def test_criterion_3_sharp_rate():
    t0 = time.perf_counter()
    lines, ok = [], True
    for m in (0.01, 0.04, 0.16):
        d = build_langevin(PotentialSpec.quadratic(m), 16, 16)
        rep = rate_scan(d, with_prefactor=False)
        root = np.sqrt(m)
        rel = abs(rep.refined_gap - root) / root
        spacing = rep.gamma_grid[1] / rep.gamma_grid[0]
        near = 1 / spacing <= rep.argmax_gamma / (2 * root) <= spacing
        ref_near = abs(rep.refined_gamma - 2 * root) <= (spacing - 1) * 2 * root
        ok &= rel < 1e-4 and near and ref_near
        lines.append(f"m={m}: gap rel err {rel:.1e}, argmax/2sqrt(m)={rep.argmax_gamma / (2 * root):.3f}")
    report("criterion 3 sharp rate", ok, time.perf_counter() - t0, 60, "; ".join(lines))


def test_criterion_4_speedup_ceiling():
    t0 = time.perf_counter()
    ok, lines = True, []
    for name, d in catalog_models().items():
        rep = rate_scan(d, refine=False)
        chk = check_rate_bounds(rep)
        ub = "n/a" if chk.upper_bound_ok is None else str(bool(np.all(chk.upper_bound_ok)))
        ok &= chk.all_ok
        lines.append(f"{name}: gap_bound={bool(np.all(chk.gap_bound_ok))} ceiling={ub}")
    report("criterion 4 speed-up ceiling", ok, time.perf_counter() - t0, 60, "; ".join(lines))


def _independent_relaxation(l_e, tol=1e-9):
    """Bisection on ||expm(tL)(I - P)||_2 = e^{-1} over the full matrix, no block splitting."""
    u, s, vh = linalg.svd(l_e)
    cut = tol * s[0]
    sgap = s[s > cut].min()
    null = vh[s <= cut].conj().T
    q = np.eye(l_e.shape[0]) - null @ null.conj().T
    f = lambda t: np.linalg.norm(linalg.expm(t * l_e) @ q, 2)
    lo, hi = 0.0, 1.0 / (2 * sgap)
    while f(hi) > np.exp(-1):
        lo, hi = hi, 2 * hi
    while hi - lo > 1e-3 * hi:
        mid = 0.5 * (lo + hi)
        lo, hi = (mid, hi) if f(mid) > np.exp(-1) else (lo, mid)
    return hi, sgap


def test_criterion_5_relaxation_bound():
    t0 = time.perf_counter()
    ok, n, worst = True, 0, np.inf
    for name, d in catalog_models().items():
        for g in default_gamma_grid(d, n=6):
            l = d.generator(g)
            rep = relaxation_time(l)
            t_ind, s_ind = _independent_relaxation(l.euclidean)
            ok &= rep.t_rel >= rep.lower_bound and t_ind >= 1 / (2 * s_ind)
            ok &= abs(rep.singular_gap - s_ind) <= 1e-8 * s_ind and abs(rep.t_rel - t_ind) <= 2e-3 * t_ind
            worst = min(worst, t_ind * 2 * s_ind)
            n += 1
    report("criterion 5 relaxation-time bound", ok, time.perf_counter() - t0, 60,
           f"{n} (model, gamma) pairs; min t_rel * 2 s = {worst:.3f}")


def test_criterion_6_flow_poincare():
    t0 = time.perf_counter()
    ok, lines = True, []
    for m in (0.04, 1.0):
        d = build_langevin(PotentialSpec.quadratic(m), 16, 16)
        ff = fit_constants(d)
        measured = rate_scan(d, with_prefactor=False).refined_gap
        pred = ff.fit.max_rate
        factor = max(pred / measured, measured / pred)
        g = ff.fit.gamma_max
        decay = verify_decay(d, g, float(ff.fit.predicted_rate(g)), ff.horizon_T)
        ok &= factor <= 4 and decay.passed
        lines.append(f"m={m}: predicted/measured factor {factor:.2f}, decay check {decay.passed}")
    grid = np.geomspace(0.1, 10, 9)
    fit = fit_ratio_model(grid, 2 + 3 * grid**2)
    syn = max(abs(fit.c1 - 2), abs(fit.c2 - 3))
    ok &= syn < 1e-8
    lines.append(f"synthetic (C1, C2) error {syn:.1e}")
    report("criterion 6 flow-Poincare pipeline", ok, time.perf_counter() - t0, 120, "; ".join(lines))


def test_criterion_7_quantum_suite():
    t0 = time.perf_counter()
    d1 = build_lindblad_heisenberg(thermal_qubit())
    rep1 = rate_scan(d1, refine=False)
    c_err = float(np.abs(rep1.prefactors - 1).max())
    monotone = True
    for g in rep1.gamma_grid[::8]:
        curve = semigroup_decay(d1.generator(g), np.linspace(0, 20 / g, 200))
        monotone &= bool(np.all(np.diff(curve) <= 1e-12))
    coercive = kernel_basis(d1.generator()).shape[1] == d1.ker_basis.shape[1]

    m2 = two_qubit_lift()
    d2 = build_lindblad_heisenberg(m2)
    k_l, k_ls = kernel_basis(d2.generator()).shape[1], d2.ker_basis.shape[1]
    p = projector(kernel_basis(d2.generator()), d2.space)
    nested = np.abs(p.matrix @ d2.ker_basis - d2.ker_basis).max() > 1e-6  # ker(L_s) not inside ker(L)
    rng = np.random.default_rng(0)
    g_ = rng.standard_normal((4, 4)) + 1j * rng.standard_normal((4, 4))
    rho = g_ @ g_.conj().T
    rho /= np.trace(rho)
    ls = schrodinger_generator(m2)
    tr_err = max(abs(np.trace(unvec(linalg.expm(t * ls) @ vec(rho))) - 1) for t in (0.1, 1, 10, 100))
    sigma = stationary_state(m2).state.matrix
    stat = float(np.abs(ls @ vec(sigma)).max())
    rep2 = rate_scan(d2, refine=False, with_prefactor=False)
    k = int(np.argmax(rep2.spectral_gaps))
    interior = 0 < k < rep2.gamma_grid.size - 1
    ok = (c_err < 5e-3 and monotone and coercive and (k_l, k_ls) == (2, 4) and nested
          and tr_err < 1e-9 and stat < 1e-10 and interior)
    report("criterion 7 quantum suite", ok, time.perf_counter() - t0, 60,
           f"thermal |C-1|={c_err:.1e} monotone={monotone}; two-qubit dims {k_l} < {k_ls}, "
           f"trace err {tr_err:.1e}, stationarity {stat:.1e}, argmax index {k}/{rep2.gamma_grid.size}")


def test_criterion_8_monte_carlo():
    t0 = time.perf_counter()
    n_paths = 100_000
    # x0 three stationary standard deviations out; v0 = -sqrt(m) x0 gives E x_t = x0 e^{-sqrt(m) t}
    cfg = SimConfig(PotentialSpec.quadratic(1.0), 0.01, 800, n_paths, gamma=2.0, seed=2024,
                    x0=3.0, v0=-3.0, record_every=5)
    nu1 = estimate_decay_rate(simulate_langevin(cfg)).nu_hat
    small = PotentialSpec.quadratic(0.01)
    lang = SimConfig(small, 0.05, 600, n_paths, gamma=0.2, seed=2025, x0=30.0, v0=-3.0, record_every=5)
    over = SimConfig(small, 0.1, 2500, n_paths, seed=2026, x0=30.0, record_every=10, observables=("x",))
    nu_l = estimate_decay_rate(simulate_langevin(lang)).nu_hat
    nu_o = estimate_decay_rate(simulate_overdamped(over)).nu_hat
    ratio = nu_l / nu_o
    ok = abs(nu1 - 1) <= 0.2 and ratio >= 5
    report("criterion 8 Monte Carlo cross-check", ok, time.perf_counter() - t0, 300,
           f"nu_hat(m=1, gamma=2)={nu1:.3f}; m=0.01 underdamped {nu_l:.4f} / overdamped {nu_o:.4f} = {ratio:.2f}")
