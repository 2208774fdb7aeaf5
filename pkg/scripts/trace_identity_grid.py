"""Trace identity error against quadrature grid size for random alpha sequences.

The error tracks how close the zeros of det phi*_n come to the unit circle;
near-circle zeros make the integrand of beta_n sharply peaked.
"""

import argparse

import numpy as np

from mopuc import VerblunskySequence
from mopuc.szego import det_products, log_beta_sequence


def random_sequence(rng, n, ell, rmax):
    out = []
    for _ in range(n):
        g = rng.standard_normal((ell, ell)) + 1j * rng.standard_normal((ell, ell))
        out.append(g / np.linalg.norm(g, 2) * rng.uniform(0, rmax))
    return np.array(out)


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--n", type=int, default=16)
    p.add_argument("--rmax", type=float, default=0.9)
    p.add_argument("--draws", type=int, default=10)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args()
    rng = np.random.default_rng(args.seed)
    grids = [1 << k for k in range(10, 17, 2)]
    print(f"{'ell':>3} " + " ".join(f"{g:>10d}" for g in grids))
    for i in range(args.draws):
        ell = 1 + i % 3
        seq = VerblunskySequence(random_sequence(rng, args.n, ell, args.rmax))
        target = det_products(seq)[-1]
        errs = [abs(np.trace(log_beta_sequence(seq, n=g)[-1]).real - target) for g in grids]
        print(f"{ell:3d} " + " ".join(f"{e:10.2e}" for e in errs))


if __name__ == "__main__":
    main()
