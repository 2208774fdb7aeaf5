"""Print tr log beta_n, the entropy gap and the HL infimum for alpha_k = R 2^-k."""

import argparse

import numpy as np

from mopuc import measure_from_alphas, szego_report

R = np.array([[0.3, 0.4], [0.0, -0.2j]])


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--terms", type=int, default=24, help="length of the truncated alpha sequence")
    p.add_argument("--n", type=int, default=12)
    args = p.parse_args()
    alphas = np.array([R * 2.0**-k for k in range(args.terms)])
    report = szego_report(measure_from_alphas(alphas), args.n)
    print(f"int tr log sigma' = {float(np.trace(report.entropy).real):.12f}")
    print(f"{'n':>3} {'tr log beta_n':>16} {'matrix residual':>16} {'hl rhs':>14}")
    for row in report.rows:
        print(f"{row.n:3d} {row.tr_log_beta:16.12f} {row.matrix_residual:16.3e} {row.hl_rhs:14.10f}")


if __name__ == "__main__":
    main()
