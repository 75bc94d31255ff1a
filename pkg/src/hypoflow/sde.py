"""
Monte Carlo simulation of underdamped and overdamped Langevin dynamics.

    dX = V dt,   dV = -U'(X) dt - gamma V dt + sqrt(2 gamma) dW
    dX = -U'(X) dt + sqrt(2) dW

Noise comes from Philox streams keyed by ``(seed, block)`` with blocks of
``BLOCK`` paths. Every block always draws a full block of normals, so the
noise seen by path ``i`` depends only on ``seed`` and ``i``.
"""

from __future__ import annotations

import io
import json
import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import PotentialSpec

BLOCK = 1024
BLOWUP = 1e8
OBSERVABLES = {
    "x": lambda x, v: x,
    "v": lambda x, v: v,
    "x2": lambda x, v: x**2,
    "v2": lambda x, v: v**2,
    "cosx": lambda x, v: np.cos(x),
    "sinx": lambda x, v: np.sin(x),
}


@dataclass(frozen=True)
class SimConfig:
    potential: PotentialSpec
    dt: float
    n_steps: int
    n_paths: int
    gamma: float | None = None
    seed: int = 0
    integrator: str = "baoab"
    initial: str = "point"
    x0: float = 1.0
    v0: float = 0.0
    record_every: int = 1
    observables: tuple = ("x", "v", "x2", "v2")

    def __post_init__(self):
        if not (self.dt > 0 and np.isfinite(self.dt)):
            raise ValueError("dt must be positive")
        if self.n_steps < 1 or self.n_paths < 2:
            raise ValueError("need n_steps >= 1 and n_paths >= 2")
        if self.record_every < 1:
            raise ValueError("record_every must be >= 1")
        if self.integrator not in ("baoab", "euler_maruyama"):
            raise ValueError(f"unknown integrator {self.integrator!r}")
        if self.initial not in ("point", "stationary"):
            raise ValueError(f"unknown initial condition {self.initial!r}")
        if self.gamma is not None and not self.gamma > 0:
            raise ValueError("gamma must be positive")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        bad = set(self.observables) - set(OBSERVABLES)
        if bad:
            raise ValueError(f"unknown observables {sorted(bad)}")

    def stiffness(self, langevin: bool) -> float:
        s = max(np.sqrt(self.potential.curvature_scale()), 1.0)
        if langevin:
            s = max(s, self.gamma)
        return float(s)

    def to_dict(self) -> dict:
        return {
            "potential": self.potential.describe(), "gamma": self.gamma, "dt": self.dt,
            "n_steps": self.n_steps, "n_paths": self.n_paths, "seed": self.seed,
            "integrator": self.integrator, "initial": self.initial, "x0": self.x0,
            "v0": self.v0, "record_every": self.record_every,
            "observables": list(self.observables),
        }


@dataclass
class TrajectoryEnsemble:
    times: np.ndarray
    means: dict
    stderr: dict
    config: dict = field(default_factory=dict)
    n_paths: int = 0

    def to_csv(self, fh=None) -> str:
        """CSV with a ``# {json config}`` header line; numbers at 17 significant digits."""
        out = io.StringIO()
        out.write("# " + json.dumps(self.config, sort_keys=True) + "\n")
        names = list(self.means)
        cols = ["time"] + [f"{n}_{k}" for n in names for k in ("mean", "stderr")]
        out.write(",".join(cols) + "\n")
        for i, t in enumerate(self.times):
            vals = [t] + [a[i] for n in names for a in (self.means[n], self.stderr[n])]
            out.write(",".join(f"{float(v):.17g}" for v in vals) + "\n")
        text = out.getvalue()
        if fh is not None:
            fh.write(text)
        return text

    def to_dict(self) -> dict:
        return {
            "config": self.config, "n_paths": self.n_paths,
            "times": self.times.tolist(),
            "means": {k: v.tolist() for k, v in self.means.items()},
            "stderr": {k: v.tolist() for k, v in self.stderr.items()},
        }


class _Noise:
    """Per-block Philox generators; ``draw()`` returns one normal per path."""

    def __init__(self, seed: int, n_paths: int):
        self.n = n_paths
        nb = -(-n_paths // BLOCK)
        self.gens = [np.random.Generator(np.random.Philox(key=[seed, b])) for b in range(nb)]

    def draw(self) -> np.ndarray:
        return np.concatenate([g.standard_normal(BLOCK) for g in self.gens])[: self.n]


def _check_step(cfg: SimConfig, langevin: bool):
    h = cfg.dt * cfg.stiffness(langevin)
    if h > 0.5:
        raise ValueError(f"dt too large for stability: dt*scale = {h:.3g} > 0.5")
    if h > 0.1:
        warnings.warn(f"dt*scale = {h:.3g} exceeds 0.1; results may be biased", stacklevel=3)


def _sample_position(pot: PotentialSpec, rng: np.random.Generator, n: int) -> np.ndarray:
    if pot.kind == "quadratic":
        return rng.standard_normal(n) / np.sqrt(pot.m)
    # rejection from the uniform law on the torus; e^{-U} is bounded
    grid = np.linspace(0, 2 * np.pi, 4097)
    umin = pot.value(grid).min() - 1e-12
    out = np.empty(0)
    while out.size < n:
        x = rng.uniform(0, 2 * np.pi, 2 * n)
        keep = rng.uniform(size=x.size) < np.exp(-(pot.value(x) - umin))
        out = np.concatenate([out, x[keep]])
    return out[:n]


def _initial(cfg: SimConfig, langevin: bool):
    n = cfg.n_paths
    if cfg.initial == "point":
        return np.full(n, float(cfg.x0)), np.full(n, float(cfg.v0) if langevin else 0.0)
    rng = np.random.Generator(np.random.Philox(key=[cfg.seed, 2**63]))
    x = _sample_position(cfg.potential, rng, n)
    v = rng.standard_normal(n) if langevin else np.zeros(n)
    return x, v


class _Recorder:
    def __init__(self, cfg: SimConfig):
        self.cfg = cfg
        self.t, self.m, self.s = [], {k: [] for k in cfg.observables}, {k: [] for k in cfg.observables}

    def __call__(self, t, x, v):
        if not (np.all(np.isfinite(x)) and np.abs(x).max() <= BLOWUP and np.abs(v).max() <= BLOWUP):
            raise FloatingPointError("blow-up: reduce dt")
        self.t.append(t)
        n = x.size
        for k in self.cfg.observables:
            f = OBSERVABLES[k](x, v)
            self.m[k].append(f.mean())
            self.s[k].append(f.std(ddof=1) / np.sqrt(n))

    def result(self) -> TrajectoryEnsemble:
        return TrajectoryEnsemble(
            np.array(self.t), {k: np.array(v) for k, v in self.m.items()},
            {k: np.array(v) for k, v in self.s.items()}, self.cfg.to_dict(), self.cfg.n_paths,
        )


def simulate_langevin(cfg: SimConfig) -> TrajectoryEnsemble:
    """Underdamped Langevin ensemble. BAOAB uses the exact Ornstein-Uhlenbeck O step."""
    if cfg.gamma is None:
        raise ValueError("Langevin simulation requires gamma")
    _check_step(cfg, True)
    force = lambda y: -cfg.potential.gradient(y)
    dt, g = cfg.dt, cfg.gamma
    x, v = _initial(cfg, True)
    noise = _Noise(cfg.seed, cfg.n_paths)
    rec = _Recorder(cfg)
    rec(0.0, x, v)
    c = np.exp(-g * dt)
    s_ou = np.sqrt(1 - c * c)
    s_em = np.sqrt(2 * g * dt)
    f = force(x)
    for n in range(1, cfg.n_steps + 1):
        xi = noise.draw()
        if cfg.integrator == "baoab":
            v = v + 0.5 * dt * f
            x = x + 0.5 * dt * v
            v = c * v + s_ou * xi
            x = x + 0.5 * dt * v
            f = force(x)
            v = v + 0.5 * dt * f
        else:
            x, v = x + dt * v, v + dt * (f - g * v) + s_em * xi
            f = force(x)
        if n % cfg.record_every == 0:
            rec(n * dt, x, v)
    return rec.result()


def simulate_overdamped(cfg: SimConfig) -> TrajectoryEnsemble:
    """Overdamped Langevin ensemble.

    ``euler_maruyama`` is the plain scheme; ``baoab`` selects its
    large-friction limit (Leimkuhler-Matthews), whose noise is the average of
    consecutive increments.
    """
    _check_step(cfg, False)
    dt = cfg.dt
    x, v = _initial(cfg, False)
    noise = _Noise(cfg.seed, cfg.n_paths)
    rec = _Recorder(cfg)
    rec(0.0, x, v)
    amp = np.sqrt(2 * dt)
    prev = noise.draw() if cfg.integrator == "baoab" else None
    for n in range(1, cfg.n_steps + 1):
        xi = noise.draw()
        if cfg.integrator == "baoab":
            x = x - dt * cfg.potential.gradient(x) + amp * 0.5 * (prev + xi)
            prev = xi
        else:
            x = x - dt * cfg.potential.gradient(x) + amp * xi
        if n % cfg.record_every == 0:
            rec(n * dt, x, v)
    return rec.result()


def stationary_mean(potential: PotentialSpec, observable: str) -> float:
    """Equilibrium expectation of an observable under e^{-U(x) - v^2/2}."""
    if observable == "v":
        return 0.0
    if observable == "v2":
        return 1.0
    if potential.kind == "quadratic":
        exact = {"x": 0.0, "sinx": 0.0, "x2": 1.0 / potential.m, "cosx": float(np.exp(-0.5 / potential.m))}
        return exact[observable]
    x = 2 * np.pi * np.arange(4096) / 4096
    w = np.exp(-(potential.value(x) - potential.value(x).min()))
    return float(np.sum(w * OBSERVABLES[observable](x, 0.0)) / w.sum())


@dataclass(frozen=True)
class DecayFit:
    nu_hat: float
    ci_95: tuple
    n_points: int
    window: tuple

    def to_dict(self) -> dict:
        return {"nu_hat": self.nu_hat, "ci_95": list(self.ci_95), "n_points": self.n_points,
                "window": list(self.window)}


def estimate_decay_rate(ens: TrajectoryEnsemble, observable: str = "x", fit_window=None,
                        equilibrium: float | None = None, min_points: int = 10) -> DecayFit:
    """Exponential rate of ``|E f(t) - E_inf f|`` by weighted log-linear least squares.

    The first 10% of the window is skipped. Points are used from there on as
    long as the signal exceeds three standard errors; fewer than
    ``min_points`` such points is refused.
    """
    if observable not in ens.means:
        raise ValueError(f"observable {observable!r} not recorded")
    if equilibrium is None:
        cfg = ens.config["potential"]
        pot = PotentialSpec.quadratic(cfg["m"]) if cfg["kind"] == "quadratic" else \
            PotentialSpec.periodic([complex(*c) for c in cfg["coefficients"]])
        equilibrium = stationary_mean(pot, observable)
    t = ens.times
    t0, t1 = (t[0], t[-1]) if fit_window is None else map(float, fit_window)
    start = t0 + 0.1 * (t1 - t0)
    sel = (t >= start) & (t <= t1)
    tt = t[sel]
    y = np.abs(ens.means[observable][sel] - equilibrium)
    se = np.maximum(ens.stderr[observable][sel], np.finfo(float).tiny)
    above = y > 3 * se
    n_ok = int(np.argmin(above)) if not above.all() else above.size
    if n_ok < min_points:
        raise ValueError("window dominated by noise")
    tt, y, se = tt[:n_ok], y[:n_ok], se[:n_ok]
    w = (y / se) ** 2
    X = np.column_stack([np.ones_like(tt), tt])
    XtW = X.T * w
    cov = np.linalg.inv(XtW @ X)
    beta = cov @ (XtW @ np.log(y))
    resid = np.log(y) - X @ beta
    chi2 = float(np.sum(w * resid**2) / max(n_ok - 2, 1))
    sd = float(np.sqrt(cov[1, 1] * max(chi2, 1.0)))
    nu = -float(beta[1])
    return DecayFit(nu, (nu - 1.96 * sd, nu + 1.96 * sd), n_ok, (float(tt[0]), float(tt[-1])))


def halve_step(cfg: SimConfig) -> SimConfig:
    """Same horizon and recording times at half the step size."""
    return replace(cfg, dt=cfg.dt / 2, n_steps=2 * cfg.n_steps, record_every=2 * cfg.record_every)
