"""Dense complex matrix kernel for small fixed dimension.

Every function accepts a single ``(l, l)`` matrix or a stack ``(..., l, l)``;
stacks are processed elementwise, which is how the quadrature grids are fed
through the matrix functions.  Hermitian eigenproblems are solved by cyclic
Jacobi sweeps in a fixed (p, q) order, so identical inputs give identical bits.
"""

from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.errors import (
    DimMismatch,
    NoConvergence,
    NotHermitian,
    NotNonnegative,
    NotPositiveDefinite,
    ValidationError,
)


class EigenDecomposition(NamedTuple):
    eigenvalues: np.ndarray  # (..., l) ascending
    eigenvectors: np.ndarray  # (..., l, l) unitary, columns


def adjoint(a: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(a, -1, -2))


def as_matrix(a, dim: int | None = None) -> np.ndarray:
    """Coerce to a complex128 array of square matrices and check finiteness."""
    m = np.asarray(a, dtype=np.complex128)
    if m.ndim < 2 or m.shape[-1] != m.shape[-2]:
        raise DimMismatch(f"expected square matrices, got shape {m.shape}")
    if dim is not None and m.shape[-1] != dim:
        raise DimMismatch(f"expected dimension {dim}, got {m.shape[-1]}")
    if not np.all(np.isfinite(m)):
        raise ValidationError("matrix entries must be finite")
    return m


def hermitian_defect(a: np.ndarray) -> np.ndarray:
    """Relative symmetry defect ||A - A^H||_F / (1 + ||A||_F), per matrix."""
    d = np.linalg.norm(a - adjoint(a), axis=(-2, -1))
    return d / (1.0 + np.linalg.norm(a, axis=(-2, -1)))


def is_hermitian(a, tol: Tolerances = DEFAULT_TOLERANCES) -> bool:
    a = as_matrix(a)
    return bool(np.all(hermitian_defect(a) <= tol.hermitian_tol))


def hermitian_part(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Validate the Hermitian invariant and return the exactly symmetrized matrix."""
    a = as_matrix(a)
    defect = hermitian_defect(a)
    if np.any(defect > tol.hermitian_tol):
        raise NotHermitian(f"symmetry defect {float(np.max(defect)):.3e} exceeds {tol.hermitian_tol:g}")
    return 0.5 * (a + adjoint(a))


def _off_norm(a: np.ndarray) -> np.ndarray:
    l = a.shape[-1]
    mask = ~np.eye(l, dtype=bool)
    return np.sqrt(np.sum(np.abs(a[:, mask]) ** 2, axis=-1))


def _jacobi(a: np.ndarray, tol: Tolerances) -> tuple[np.ndarray, np.ndarray]:
    """Cyclic Jacobi on a stack (B, l, l) of exactly Hermitian matrices."""
    b, l, _ = a.shape
    # exact power-of-two scaling keeps subnormal entries out of the rotation formulas
    big = np.abs(a).max(axis=(-2, -1))
    e = np.frexp(np.where(big > 0, big, 1.0))[1][:, None, None]
    a = np.ldexp(a.real, -e) + 1j * np.ldexp(a.imag, -e)
    tiny = np.finfo(float).eps ** 2
    a[np.abs(a) < tiny] = 0.0
    v = np.broadcast_to(np.eye(l, dtype=np.complex128), a.shape).copy()
    thresh = tol.jacobi_threshold * np.linalg.norm(a, axis=(-2, -1))
    active = np.ones(b, dtype=bool)
    for _ in range(tol.max_sweeps):
        # a matrix whose off-diagonal mass is below threshold is frozen for good
        active &= _off_norm(a) > thresh
        if not active.any():
            break
        for p in range(l - 1):
            for q in range(p + 1, l):
                mag = np.abs(a[:, p, q])
                idx = np.nonzero(active & (mag > tiny))[0]
                if idx.size == 0:
                    continue
                s_a = a[idx]
                s_v = v[idx]
                m = mag[idx]
                phase = s_a[:, p, q] / m
                app = s_a[:, p, p].real.copy()
                aqq = s_a[:, q, q].real.copy()
                theta = (aqq - app) / (2.0 * m)
                sgn = np.where(theta >= 0.0, 1.0, -1.0)
                t = sgn / (np.abs(theta) + np.hypot(theta, 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ph = np.conj(phase)
                jpp, jpq, jqp, jqq = c, s, -s * ph, c * ph
                cp = s_a[:, :, p].copy()
                cq = s_a[:, :, q]
                s_a[:, :, p] = cp * jpp[:, None] + cq * jqp[:, None]
                s_a[:, :, q] = cp * jpq[:, None] + cq * jqq[:, None]
                rp = s_a[:, p, :].copy()
                rq = s_a[:, q, :]
                s_a[:, p, :] = np.conj(jpp)[:, None] * rp + np.conj(jqp)[:, None] * rq
                s_a[:, q, :] = np.conj(jpq)[:, None] * rp + np.conj(jqq)[:, None] * rq
                s_a[:, p, p] = app - t * m
                s_a[:, q, q] = aqq + t * m
                s_a[:, p, q] = 0.0
                s_a[:, q, p] = 0.0
                vp = s_v[:, :, p].copy()
                vq = s_v[:, :, q]
                s_v[:, :, p] = vp * jpp[:, None] + vq * jqp[:, None]
                s_v[:, :, q] = vp * jpq[:, None] + vq * jqq[:, None]
                a[idx] = s_a
                v[idx] = s_v
    else:
        if np.any(_off_norm(a) > thresh):
            raise NoConvergence(f"Jacobi did not converge in {tol.max_sweeps} sweeps")
    w = np.ldexp(np.real(np.diagonal(a, axis1=-2, axis2=-1)), e[:, :, 0])
    order = np.argsort(w, axis=-1, kind="stable")
    w = np.take_along_axis(w, order, axis=-1)
    v = np.take_along_axis(v, order[:, None, :], axis=-1)
    return w, v


def hermitian_eig(a, tol: Tolerances = DEFAULT_TOLERANCES) -> EigenDecomposition:
    """Eigendecomposition ``A = U diag(w) U^H`` with ``w`` ascending.

    >>> hermitian_eig(np.array([[2, 1j], [-1j, 2]])).eigenvalues
    array([1., 3.])
    """
    h = hermitian_part(a, tol)
    shape = h.shape
    l = shape[-1]
    flat = h.reshape(-1, l, l)
    if l == 1:
        w = flat[:, :, 0].real.copy()
        v = np.ones_like(flat)
    else:
        w, v = _jacobi(flat, tol)
    return EigenDecomposition(w.reshape(shape[:-1]), v.reshape(shape))


def apply_function(dec: EigenDecomposition, f: Callable[[np.ndarray], np.ndarray]) -> np.ndarray:
    """Functional calculus ``U f(Lambda) U^H``."""
    u = dec.eigenvectors
    fw = np.asarray(f(dec.eigenvalues))
    return (u * fw[..., None, :]) @ adjoint(u)


def _scale(w: np.ndarray) -> np.ndarray:
    return np.maximum(1.0, np.max(np.abs(w), axis=-1))


def _require_pd(w: np.ndarray, tol: Tolerances) -> None:
    top = w[..., -1]
    bad = (top <= 0.0) | (w[..., 0] <= tol.pd_floor * top)
    if np.any(bad):
        raise NotPositiveDefinite(
            f"smallest eigenvalue {float(np.min(w[..., 0])):.3e} is below the positive-definite floor"
        )


def _require_nonneg(w: np.ndarray, tol: Tolerances) -> None:
    if np.any(w[..., 0] < -tol.eig_tol * _scale(w)):
        raise NotNonnegative(f"smallest eigenvalue {float(np.min(w[..., 0])):.3e} is negative")


def is_positive_definite(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    w = hermitian_eig(a, tol).eigenvalues
    return (w[..., -1] > 0.0) & (w[..., 0] > tol.pd_floor * w[..., -1])


def matrix_log_hpd(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    dec = hermitian_eig(a, tol)
    _require_pd(dec.eigenvalues, tol)
    return apply_function(dec, np.log)


def matrix_sqrt_hpd(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """Nonnegative square root of a nonnegative Hermitian matrix."""
    dec = hermitian_eig(a, tol)
    _require_nonneg(dec.eigenvalues, tol)
    return apply_function(dec, lambda w: np.sqrt(np.clip(w, 0.0, None)))


def matrix_power_hpd(a, power: float, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    dec = hermitian_eig(a, tol)
    _require_pd(dec.eigenvalues, tol)
    return apply_function(dec, lambda w: w**power)


def matrix_exp_herm(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    return apply_function(hermitian_eig(a, tol), np.exp)


def _gram_eigenvalues(a, tol: Tolerances) -> np.ndarray:
    a = as_matrix(a)
    return np.clip(hermitian_eig(adjoint(a) @ a, tol).eigenvalues, 0.0, None)


def spectral_norm(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray | float:
    """Largest singular value."""
    out = np.sqrt(_gram_eigenvalues(a, tol)[..., -1])
    return float(out) if out.ndim == 0 else out


def trace_norm(a, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray | float:
    out = np.sum(np.sqrt(_gram_eigenvalues(a, tol)), axis=-1)
    return float(out) if out.ndim == 0 else out


def hs_norm(a) -> np.ndarray | float:
    a = as_matrix(a)
    out = np.sqrt(np.sum(np.abs(a) ** 2, axis=(-2, -1)))
    return float(out) if out.ndim == 0 else out


def loewner_leq(a, b, tol: float = DEFAULT_TOLERANCES.eig_tol) -> bool:
    """``A <= B`` in the Loewner order, i.e. ``B - A`` is nonnegative up to ``tol``."""
    a = hermitian_part(a)
    b = hermitian_part(b)
    if a.shape != b.shape:
        raise DimMismatch(f"shapes {a.shape} and {b.shape} differ")
    w = hermitian_eig(b - a).eigenvalues
    return bool(np.all(w[..., 0] >= -tol))


def min_trace_over_det1(c, tol: Tolerances = DEFAULT_TOLERANCES) -> tuple[float, np.ndarray]:
    """Minimize ``tr(A C A^H) / l`` over ``det A = 1`` for positive ``C``.

    Returns the minimum ``det(C)**(1/l)`` and the analytic minimizer: in the
    eigenbasis of ``C`` it is diagonal with entries proportional to
    ``lambda_k**-1/2``, scaled (with a phase) to have determinant one.
    """
    c = as_matrix(c)
    if c.ndim != 2:
        raise DimMismatch("min_trace_over_det1 takes a single matrix")
    l = c.shape[0]
    w, u = hermitian_eig(c, tol)
    _require_pd(w, tol)
    log_mean = float(np.mean(np.log(w)))
    value = float(np.exp(log_mean))
    det_u = np.linalg.det(u)
    a = np.sqrt(value) * det_u ** (1.0 / l)
    minimizer = (a / np.sqrt(w))[:, None] * adjoint(u)
    return value, minimizer


def log_monotonicity_margin(a, b, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Smallest eigenvalue of ``log B - log A``; nonnegative whenever ``0 < A <= B``."""
    d = matrix_log_hpd(b, tol) - matrix_log_hpd(a, tol)
    return float(hermitian_eig(d, tol).eigenvalues[0])


def log_concavity_margin(a, b, t: float, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Smallest eigenvalue of ``log(tA + (1-t)B) - t log A - (1-t) log B``."""
    mix = matrix_log_hpd(t * as_matrix(a) + (1.0 - t) * as_matrix(b), tol)
    d = mix - t * matrix_log_hpd(a, tol) - (1.0 - t) * matrix_log_hpd(b, tol)
    return float(hermitian_eig(d, tol).eigenvalues[0])


def log_continuity_margin(a, b, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """``||A - B|| / min(lambda_min) - ||log A - log B||``, nonnegative for positive A, B."""
    wa = hermitian_eig(a, tol).eigenvalues
    wb = hermitian_eig(b, tol).eigenvalues
    _require_pd(wa, tol)
    _require_pd(wb, tol)
    bound = spectral_norm(as_matrix(a) - as_matrix(b), tol) / min(wa[0], wb[0])
    return float(bound - spectral_norm(matrix_log_hpd(a, tol) - matrix_log_hpd(b, tol), tol))
