"""Monte Carlo decay rates against the spectral prediction.

Critically damped m = 1 (rate 1), then the small-m comparison of underdamped
dynamics at gamma = 2 sqrt(m) with overdamped dynamics.

    python scripts/monte_carlo_check.py --paths 100000
"""

import argparse

import numpy as np

from hypoflow import PotentialSpec, SimConfig, estimate_decay_rate, simulate_langevin, simulate_overdamped


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--paths", type=int, default=100_000)
    p.add_argument("--m", type=float, default=0.01, help="curvature for the speed-up comparison")
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--csv", help="write the m = 1 ensemble here")
    args = p.parse_args(argv)

    # start three stationary standard deviations out; v0 = -sqrt(m) x0 keeps the mean a pure exponential
    cfg = SimConfig(PotentialSpec.quadratic(1.0), 0.01, 800, args.paths, gamma=2.0, seed=args.seed,
                    x0=3.0, v0=-3.0, record_every=5)
    ens = simulate_langevin(cfg)
    fit = estimate_decay_rate(ens)
    print(f"m=1, gamma=2: nu_hat={fit.nu_hat:.4f}, 95% CI [{fit.ci_95[0]:.4f}, {fit.ci_95[1]:.4f}], predicted 1")
    if args.csv:
        with open(args.csv, "w") as fh:
            ens.to_csv(fh)

    m = args.m
    root = np.sqrt(m)
    pot = PotentialSpec.quadratic(m)
    x0 = 3 / root
    lang = SimConfig(pot, 0.05, int(3 / (root * 0.05)), args.paths, gamma=2 * root, seed=args.seed + 1,
                     x0=x0, v0=-root * x0, record_every=5)
    over = SimConfig(pot, 0.1, int(2.5 / (m * 0.1)), args.paths, seed=args.seed + 2, x0=x0,
                     record_every=10, observables=("x",))
    nu_l = estimate_decay_rate(simulate_langevin(lang)).nu_hat
    nu_o = estimate_decay_rate(simulate_overdamped(over)).nu_hat
    print(f"m={m:g}: underdamped {nu_l:.5f} (predicted {root:.5f}), overdamped {nu_o:.5f} "
          f"(predicted {m:.5f}), ratio {nu_l / nu_o:.2f} (ideal {1 / root:.2f})")


if __name__ == "__main__":
    main()
