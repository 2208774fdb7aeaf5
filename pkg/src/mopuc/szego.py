"""Matrix entropy, the beta_n functionals and the Helson-Lowdenslager distance.

``log beta_n = int log([phi_n^{R,*}(z)^H phi_n^{R,*}(z)]^{-1}) d theta / 2 pi`` is
evaluated by the periodic trapezoid rule on the uniform grid; as ``n`` grows it
tends to the entropy ``int log sigma' d theta / 2 pi`` of the measure.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.matlin import (
    adjoint,
    apply_function,
    as_matrix,
    hermitian_eig,
    hermitian_part,
    matrix_exp_herm,
    matrix_log_hpd,
    matrix_sqrt_hpd,
    min_trace_over_det1,
    spectral_norm,
)
from mopuc.measure import MatrixMeasure, encode_matrix, grid_angles, moments
from mopuc.polynomials import VerblunskySequence, iterate_transfer, orthogonal_system


class _MinusInfinity:
    """Entropy of a measure whose density is singular on a set of positive measure."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "MINUS_INFINITY"

    def __reduce__(self):
        return (_MinusInfinity, ())


MINUS_INFINITY = _MinusInfinity()


def entropy_trace(entropy) -> float:
    return -math.inf if entropy is MINUS_INFINITY else float(np.trace(entropy).real)


def _grid(n: int | None, tol: Tolerances) -> int:
    return tol.default_grid if n is None else n


def entropy_integral(measure: MatrixMeasure, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES):
    """Grid quadrature of ``log sigma'``; ``MINUS_INFINITY`` if a sample is singular.

    Atoms are ignored. Grid measures use their own grid and ``n`` is only used
    for Fourier densities.
    """
    samples = measure.density_samples(None if measure.kind == "grid" else _grid(n, tol))
    dec = hermitian_eig(samples, tol)
    w = dec.eigenvalues
    if np.any((w[..., -1] <= 0.0) | (w[..., 0] <= tol.pd_floor * w[..., -1])):
        return MINUS_INFINITY
    return hermitian_part(np.mean(apply_function(dec, np.log), axis=0))


def _log_inverse_gram(rs: np.ndarray, tol: Tolerances) -> np.ndarray:
    """``log([R^H R]^{-1}) = -log(R^H R)`` for a stack of invertible ``R``."""
    return -matrix_log_hpd(hermitian_part(adjoint(rs) @ rs), tol)


def log_beta_sequence(
    seq: VerblunskySequence, n_max: int | None = None, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """``log beta_k`` for k = 0..n_max as an array ``(n_max+1, l, l)``."""
    seq.require_strict(tol)
    n_max = len(seq) if n_max is None else n_max
    if n_max > len(seq):
        raise ValueError(f"n_max={n_max} exceeds the {len(seq)} available parameters")
    zs = np.exp(1j * grid_angles(_grid(n, tol)))
    out = []
    for k, (_, rs) in enumerate(iterate_transfer(seq.truncate(n_max), zs)):
        out.append(hermitian_part(np.mean(_log_inverse_gram(rs, tol), axis=0)))
    return np.array(out)


def left_log_beta_sequence(
    seq: VerblunskySequence, n_max: int | None = None, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> np.ndarray:
    """``int log([phi_k^{L,*} phi_k^{L,*H}]^{-1})`` for k = 0..n_max.

    ``phi^{L,*}(z) = phi^{R,*}(conj z; alpha^H)^H``, so the transfer sweep runs on
    the conjugate parameters at the conjugate grid points.
    """
    seq.require_strict(tol)
    n_max = len(seq) if n_max is None else n_max
    zs = np.exp(-1j * grid_angles(_grid(n, tol)))
    out = []
    for _, crs in iterate_transfer(seq.conjugate().truncate(n_max), zs):
        ls = adjoint(crs)
        out.append(hermitian_part(np.mean(-matrix_log_hpd(hermitian_part(ls @ adjoint(ls)), tol), axis=0)))
    return np.array(out)


def log_beta_n(seq: VerblunskySequence, k: int, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    return log_beta_sequence(seq.truncate(k), k, n, tol)[-1]


def beta_n(seq: VerblunskySequence, k: int, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """``beta_k = exp log beta_k``; satisfies ``0 < beta_k <= 1``."""
    if k > len(seq):
        raise ValueError(f"k={k} exceeds the {len(seq)} available parameters")
    return matrix_exp_herm(log_beta_n(seq, k, n, tol), tol)


def det_products(seq: VerblunskySequence) -> np.ndarray:
    """``sum_{k<n} log det(1 - alpha_k alpha_k^H)`` for n = 0..len."""
    eye = np.eye(seq.dim)
    terms = [np.linalg.slogdet(eye - a @ adjoint(a))[1] for a in seq.alphas]
    return np.concatenate([[0.0], np.cumsum(terms)])


def hl_gram(seq: VerblunskySequence, k: int) -> np.ndarray:
    """``(kappa_k^R)^{-H} (kappa_k^R)^{-1}``: the left Gram matrix of ``Phi_k^{R,*}``."""
    inv = np.linalg.inv(seq.kappa_R[k])
    return hermitian_part(adjoint(inv) @ inv)


def hl_distance(seq: VerblunskySequence, k: int) -> np.ndarray:
    """Left matrix distance from 1 to ``z P_{k-1}``: the positive square root of
    ``(kappa_k^R)^{-H} (kappa_k^R)^{-1}``.

    Its square has trace ``dist_L(1, z P_{k-1})**2``. It coincides with the ordered
    product ``rho_{k-1}^R ... rho_0^R`` when the rho's commute; in general the two
    differ by a unitary factor on the left.
    """
    if k > len(seq):
        raise ValueError(f"k={k} exceeds the {len(seq)} available parameters")
    return matrix_sqrt_hpd(hl_gram(seq, k))


def rho_product(seq: VerblunskySequence, k: int) -> np.ndarray:
    """Ordered product ``rho_{k-1}^R ... rho_0^R`` (equals ``(kappa_k^R)^{-1}``)."""
    out = np.eye(seq.dim, dtype=np.complex128)
    for r in seq.rho_R[:k]:
        out = r @ out
    return out


class HLCheck(NamedTuple):
    lhs: float
    rhs: float


def _hl_lhs(entropy, dim: int) -> float:
    tr = entropy_trace(entropy)
    return 0.0 if tr == -math.inf else math.exp(tr / dim)


def hl_infimum_sequence(
    measure: MatrixMeasure, n_max: int, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> tuple[float, np.ndarray]:
    """``exp((1/l) int tr log sigma')`` and the finite-section infima for k = 0..n_max.

    The k-th infimum is ``min_{det A = 1} (1/l) tr(A G_k A^H)`` with ``G_k`` the Gram
    matrix of the monic right polynomial, computed from the moments.
    """
    system = orthogonal_system(moments(measure, n_max), n_max, tol)
    rhs = np.array([min_trace_over_det1(g, tol)[0] for g in system.gram_R])
    return _hl_lhs(entropy_integral(measure, n, tol), measure.dim), rhs


def hl_infimum_check(measure: MatrixMeasure, k: int, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> HLCheck:
    lhs, rhs = hl_infimum_sequence(measure, k, n, tol)
    return HLCheck(lhs, float(rhs[k]))


def jensen_check(f, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Smallest eigenvalue of ``log(mean f) - mean(log f)`` over a grid of positive matrices."""
    f = as_matrix(f)
    gap = matrix_log_hpd(np.mean(f, axis=0), tol) - np.mean(matrix_log_hpd(f, tol), axis=0)
    return float(hermitian_eig(hermitian_part(gap), tol).eigenvalues[0])


# ------------------------------------------------------------------ report


@dataclass
class SzegoRow:
    n: int
    log_beta: np.ndarray
    tr_log_beta: float
    det_product: float
    matrix_residual: float
    trace_residual: float
    hl_rhs: float
    alpha_sum: float  # sum_{k<n} ||alpha_k^H alpha_k||
    szego_flag: bool


@dataclass
class SzegoReport:
    dim: int
    grid: int
    entropy: object  # (l, l) array or MINUS_INFINITY
    hl_lhs: float
    alphas: VerblunskySequence
    rows: list[SzegoRow] = field(default_factory=list)

    CSV_COLUMNS = ("n", "tr_log_beta", "det_product", "trace_residual", "matrix_residual", "hl_rhs")

    @property
    def entropy_trace(self) -> float:
        return entropy_trace(self.entropy)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.CSV_COLUMNS)
        for r in self.rows:
            w.writerow([r.n] + [_fmt(getattr(r, c)) for c in self.CSV_COLUMNS[1:]])
        return buf.getvalue()

    def to_dict(self) -> dict:
        return {
            "ell": self.dim,
            "grid": self.grid,
            "entropy": None if self.entropy is MINUS_INFINITY else encode_matrix(self.entropy),
            "entropy_trace": _json_float(self.entropy_trace),
            "hl_lhs": self.hl_lhs,
            "alphas": [encode_matrix(a) for a in self.alphas.alphas],
            "rows": [
                {
                    "n": r.n,
                    "log_beta": encode_matrix(r.log_beta),
                    "tr_log_beta": r.tr_log_beta,
                    "det_product": r.det_product,
                    "trace_residual": _json_float(r.trace_residual),
                    "matrix_residual": _json_float(r.matrix_residual),
                    "hl_rhs": r.hl_rhs,
                    "alpha_sum": r.alpha_sum,
                    "szego_flag": r.szego_flag,
                }
                for r in self.rows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _json_float(x: float):
    return None if math.isinf(x) else x


def szego_report(
    measure: MatrixMeasure, n_max: int, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES
) -> SzegoReport:
    """Per-n comparison of ``log beta_n`` with the entropy of ``measure``.

    The Szego flag is a heuristic on the partial sums ``S_n`` of
    ``||alpha_k^H alpha_k||``: raised when ``S_n - S_{ceil(n/2)}`` is below
    ``tol.szego_tail_tol``.
    """
    grid = _grid(n, tol)
    system = orthogonal_system(moments(measure, n_max), n_max, tol)
    seq = system.sequence
    entropy = entropy_integral(measure, grid, tol)
    log_betas = log_beta_sequence(seq, n_max, grid, tol)
    dets = det_products(seq)
    terms = np.array([spectral_norm(adjoint(a) @ a, tol) for a in seq.alphas]) if len(seq) else np.zeros(0)
    sums = np.concatenate([[0.0], np.cumsum(terms)])
    ent_tr = entropy_trace(entropy)
    report = SzegoReport(measure.dim, grid, entropy, _hl_lhs(entropy, measure.dim), seq)
    for k in range(n_max + 1):
        lb = log_betas[k]
        tr = float(np.trace(lb).real)
        if entropy is MINUS_INFINITY:
            mres = tres = math.inf
        else:
            mres = float(spectral_norm(lb - entropy, tol))
            tres = abs(tr - ent_tr)
        report.rows.append(
            SzegoRow(
                n=k,
                log_beta=lb,
                tr_log_beta=tr,
                det_product=float(dets[k]),
                matrix_residual=mres,
                trace_residual=tres,
                hl_rhs=min_trace_over_det1(system.gram_R[k], tol)[0],
                alpha_sum=float(sums[k]),
                szego_flag=bool(sums[k] - sums[(k + 1) // 2] <= tol.szego_tail_tol),
            )
        )
    return report
