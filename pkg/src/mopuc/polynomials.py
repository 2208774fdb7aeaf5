"""Szego recursion for matrix orthogonal polynomials on the unit circle.

Conventions: ``<f, g>_R = int f^H dsigma g`` and ``<f, g>_L = int g dsigma f^H``;
``P^*(z) = z^n P(1/conj z)^H``; the one-step transfer matrix is

    A(alpha, z) = [[ z rhoL^-1,         -rhoL^-1 alpha^H ],
                   [ -z rhoR^-1 alpha,   rhoR^-1         ]]

with ``rhoL = (1 - alpha^H alpha)^(1/2)``, ``rhoR = (1 - alpha alpha^H)^(1/2)``,
and ``(phi_n^L; phi_n^{R,*}) = A(alpha_{n-1}, z) ... A(alpha_0, z) (1; 1)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple

import numpy as np
import scipy.linalg

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.errors import DimMismatch, NonContractive, NotContractive, ToeplitzNotPD
from mopuc.matlin import (
    adjoint,
    as_matrix,
    hermitian_eig,
    hermitian_part,
    matrix_power_hpd,
    matrix_sqrt_hpd,
    spectral_norm,
)
from mopuc.measure import MomentSequence


@dataclass(frozen=True, eq=False)
class VerblunskySequence:
    """Contractive parameters ``alpha_0 .. alpha_{n-1}`` and the derived rho / kappa."""

    alphas: np.ndarray  # (n, l, l)

    def __post_init__(self):
        a = np.asarray(self.alphas, dtype=np.complex128)
        if a.ndim != 3:
            raise DimMismatch(f"alphas must have shape (n, l, l), got {a.shape}")
        a = as_matrix(a) if a.shape[0] else a
        if a.shape[-1] != a.shape[-2] or a.shape[-1] < 1:
            raise DimMismatch(f"alphas must be square, got {a.shape}")
        a = np.ascontiguousarray(a)
        a.setflags(write=False)
        object.__setattr__(self, "alphas", a)
        if len(a) and np.max(self.norms) > 1.0 + 1e-12:
            raise NotContractive(f"alpha has norm {np.max(self.norms):.6g} > 1")

    @classmethod
    def empty(cls, dim: int) -> "VerblunskySequence":
        return cls(np.zeros((0, dim, dim)))

    @property
    def dim(self) -> int:
        return self.alphas.shape[-1]

    def __len__(self) -> int:
        return self.alphas.shape[0]

    @cached_property
    def norms(self) -> np.ndarray:
        if not len(self):
            return np.zeros(0)
        return np.atleast_1d(spectral_norm(self.alphas))

    def require_strict(self, tol: Tolerances = DEFAULT_TOLERANCES) -> None:
        if len(self) and np.max(self.norms) >= 1.0 - tol.breakdown_margin:
            k = int(np.argmax(self.norms))
            raise NotContractive(f"alpha_{k} has norm {self.norms[k]:.12g}, strict contraction required")

    def conjugate(self) -> "VerblunskySequence":
        """Parameters ``alpha_k^H`` of the reflected measure."""
        return VerblunskySequence(adjoint(self.alphas))

    def truncate(self, n: int) -> "VerblunskySequence":
        return VerblunskySequence(self.alphas[:n])

    def padded(self, n: int) -> "VerblunskySequence":
        extra = max(0, n - len(self))
        return VerblunskySequence(np.concatenate([self.alphas, np.zeros((extra, self.dim, self.dim))]))

    @cached_property
    def _one_minus(self):
        eye = np.eye(self.dim)
        aha = hermitian_part(eye - adjoint(self.alphas) @ self.alphas)
        aah = hermitian_part(eye - self.alphas @ adjoint(self.alphas))
        return aha, aah

    @cached_property
    def rho_L(self) -> np.ndarray:
        return matrix_sqrt_hpd(self._one_minus[0]) if len(self) else self.alphas.copy()

    @cached_property
    def rho_R(self) -> np.ndarray:
        return matrix_sqrt_hpd(self._one_minus[1]) if len(self) else self.alphas.copy()

    @cached_property
    def rho_L_inv(self) -> np.ndarray:
        self.require_strict()
        return matrix_power_hpd(self._one_minus[0], -0.5) if len(self) else self.alphas.copy()

    @cached_property
    def rho_R_inv(self) -> np.ndarray:
        self.require_strict()
        return matrix_power_hpd(self._one_minus[1], -0.5) if len(self) else self.alphas.copy()

    @cached_property
    def kappa_L(self) -> np.ndarray:
        """``kappa_n^L = (rho_0^L ... rho_{n-1}^L)^{-1}`` for n = 0..len."""
        out = [np.eye(self.dim, dtype=np.complex128)]
        for r in self.rho_L_inv:
            out.append(r @ out[-1])
        return np.array(out)

    @cached_property
    def kappa_R(self) -> np.ndarray:
        """``kappa_n^R = (rho_{n-1}^R ... rho_0^R)^{-1}`` for n = 0..len."""
        out = [np.eye(self.dim, dtype=np.complex128)]
        for r in self.rho_R_inv:
            out.append(out[-1] @ r)
        return np.array(out)


class PolynomialEvaluation(NamedTuple):
    z: complex
    phiL: np.ndarray
    phiR: np.ndarray
    phiLstar: np.ndarray
    phiRstar: np.ndarray


def transfer_matrix(alpha, z, tol: Tolerances = DEFAULT_TOLERANCES) -> np.ndarray:
    """A(alpha, z); an array of ``z`` gives a stack of shape ``z.shape + (2l, 2l)``."""
    seq = VerblunskySequence(as_matrix(alpha)[None])
    seq.require_strict(tol)
    a = seq.alphas[0]
    il, ir = seq.rho_L_inv[0], seq.rho_R_inv[0]
    zz = np.asarray(z, dtype=np.complex128)[..., None, None]
    top_right = np.broadcast_to(-il @ adjoint(a), zz.shape[:-2] + il.shape)
    bottom_right = np.broadcast_to(ir, zz.shape[:-2] + ir.shape)
    top = np.concatenate([zz * il, top_right], axis=-1)
    bottom = np.concatenate([zz * (-ir @ a), bottom_right], axis=-1)
    return np.concatenate([top, bottom], axis=-2)


def transfer_factors(alpha, z: complex) -> list[np.ndarray]:
    """Four-factor (Schur) form of the transfer matrix, in product order."""
    seq = VerblunskySequence(as_matrix(alpha)[None])
    seq.require_strict()
    a = seq.alphas[0]
    l = seq.dim
    eye, zero = np.eye(l), np.zeros((l, l))
    diag = np.block([[seq.rho_L_inv[0], zero], [zero, seq.rho_R_inv[0]]])
    lower = np.block([[eye, zero], [-a, eye]])
    middle = np.block([[z * eye, zero], [zero, eye - a @ adjoint(a)]])
    upper = np.block([[eye, -adjoint(a) / z], [zero, eye]])
    return [diag, lower, middle, upper]


def iterate_transfer(seq: VerblunskySequence, zs) -> Iterator[tuple[np.ndarray, np.ndarray]]:
    """Yield ``(phi_n^L(z), phi_n^{R,*}(z))`` stacked over ``zs`` for n = 0..len(seq)."""
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    l = seq.dim
    phi_l = np.broadcast_to(np.eye(l, dtype=np.complex128), (zs.size, l, l)).copy()
    phi_rs = phi_l.copy()
    yield phi_l, phi_rs
    if not len(seq):
        return
    zz = zs[:, None, None]
    for a, il, ir in zip(seq.alphas, seq.rho_L_inv, seq.rho_R_inv):
        new_l = il @ (zz * phi_l - adjoint(a) @ phi_rs)
        phi_rs = ir @ (phi_rs - zz * (a @ phi_l))
        phi_l = new_l
        yield phi_l, phi_rs


def _final(seq: VerblunskySequence, zs) -> tuple[np.ndarray, np.ndarray]:
    for out in iterate_transfer(seq, zs):
        pass
    return out


def circle_values(seq: VerblunskySequence, theta) -> tuple[np.ndarray, np.ndarray]:
    """``phi_n^L`` and ``phi_n^{R,*}`` at ``exp(i theta)`` for every angle."""
    return _final(seq, np.exp(1j * np.asarray(theta, dtype=float)))


def eval_all(seq: VerblunskySequence, zs) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """``(phiL, phiR, phiLstar, phiRstar)`` stacked over ``zs``.

    The right polynomial and the left dual come from the conjugate parameters:
    ``phi^R(z) = phi^L(conj z; alpha^H)^H`` and ``phi^{L,*}(z) = phi^{R,*}(conj z; alpha^H)^H``.
    """
    zs = np.atleast_1d(np.asarray(zs, dtype=np.complex128))
    phi_l, phi_rs = _final(seq, zs)
    cl, crs = _final(seq.conjugate(), np.conj(zs))
    return phi_l, adjoint(cl), adjoint(crs), phi_rs


def eval_polynomials(seq: VerblunskySequence, z: complex) -> PolynomialEvaluation:
    phi_l, phi_r, phi_ls, phi_rs = eval_all(seq, z)
    return PolynomialEvaluation(complex(z), phi_l[0], phi_r[0], phi_ls[0], phi_rs[0])


class RecursionResidual(NamedTuple):
    s1: float
    s2: float

    @property
    def max(self) -> float:
        return max(self.s1, self.s2)


def check_recursion(seq: VerblunskySequence, z: complex) -> RecursionResidual:
    """Max over n of the residuals of

        z phi_n^L - rho_n^L phi_{n+1}^L - alpha_n^H phi_n^{R,*}
        z phi_n^R - phi_{n+1}^R rho_n^R - phi_n^{L,*} alpha_n^H
    """
    s1 = s2 = 0.0
    for n in range(len(seq)):
        cur = eval_polynomials(seq.truncate(n), z)
        nxt = eval_polynomials(seq.truncate(n + 1), z)
        a = seq.alphas[n]
        r1 = z * cur.phiL - seq.rho_L[n] @ nxt.phiL - adjoint(a) @ cur.phiRstar
        r2 = z * cur.phiR - nxt.phiR @ seq.rho_R[n] - cur.phiLstar @ adjoint(a)
        s1 = max(s1, float(np.linalg.norm(r1, 2)))
        s2 = max(s2, float(np.linalg.norm(r2, 2)))
    return RecursionResidual(s1, s2)


def mobius_identity_check(alpha, z: complex, tol: Tolerances = DEFAULT_TOLERANCES) -> float:
    """Residual of ``(1 - zb a^H)(1 - a a^H)^{-1}(1 - z a) = [(1 - zb a^H)^{-1} + (1 - z a)^{-1} - 1]^{-1}``."""
    a = as_matrix(alpha)
    VerblunskySequence(a[None]).require_strict(tol)
    eye = np.eye(a.shape[0])
    b = eye - z * a
    bh = eye - np.conj(z) * adjoint(a)
    lhs = bh @ np.linalg.solve(eye - a @ adjoint(a), b)
    rhs = np.linalg.inv(np.linalg.inv(bh) + np.linalg.inv(b) - eye)
    return float(np.linalg.norm(lhs - rhs, 2))


# ----------------------------------------------------------- coefficients


def reverse(coeffs: np.ndarray) -> np.ndarray:
    """Coefficients of ``P^*`` for a degree-n polynomial with coefficients ``(n+1, l, l)``."""
    return adjoint(coeffs[::-1])


def horner(coeffs: np.ndarray, z: complex) -> np.ndarray:
    out = np.zeros(coeffs.shape[1:], dtype=np.complex128)
    for c in coeffs[::-1]:
        out = out * z + c
    return out


class PolynomialCoefficients(NamedTuple):
    phiL: list[np.ndarray]  # phiL[n] has shape (n+1, l, l), ascending powers
    phiR: list[np.ndarray]


def polynomial_coefficients(seq: VerblunskySequence) -> PolynomialCoefficients:
    """Coefficients of ``phi_n^L`` and ``phi_n^R`` built from the recursion in coefficient space."""
    l = seq.dim
    left = [np.eye(l, dtype=np.complex128)[None]]
    right = [np.eye(l, dtype=np.complex128)[None]]
    for a, il, ir in zip(seq.alphas, seq.rho_L_inv, seq.rho_R_inv):
        pl, pr = left[-1], right[-1]
        zl = np.concatenate([np.zeros((1, l, l)), pl])
        zr = np.concatenate([np.zeros((1, l, l)), pr])
        rs = np.concatenate([reverse(pr), np.zeros((1, l, l))])
        ls = np.concatenate([reverse(pl), np.zeros((1, l, l))])
        left.append(il @ (zl - adjoint(a) @ rs))
        right.append((zr - ls @ adjoint(a)) @ ir)
    return PolynomialCoefficients(left, right)


def right_form(mom: MomentSequence, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``<P, Q>_R = sum_jk P_j^H c_{j-k} Q_k``."""
    out = np.zeros((mom.dim, mom.dim), dtype=np.complex128)
    for j, pj in enumerate(p):
        for k, qk in enumerate(q):
            out += adjoint(pj) @ mom[j - k] @ qk
    return out


def left_form(mom: MomentSequence, p: np.ndarray, q: np.ndarray) -> np.ndarray:
    """``<P, Q>_L = sum_jk Q_k c_{j-k} P_j^H``."""
    out = np.zeros((mom.dim, mom.dim), dtype=np.complex128)
    for j, pj in enumerate(p):
        for k, qk in enumerate(q):
            out += qk @ mom[j - k] @ adjoint(pj)
    return out


# --------------------------------------------------------- moment side


@dataclass(frozen=True, eq=False)
class OrthogonalSystem:
    """Monic polynomials, Gram matrices and normalizations computed from moments."""

    monic_R: list[np.ndarray]  # monic_R[m]: (m+1, l, l), ascending, leading = 1
    monic_L: list[np.ndarray]
    gram_R: np.ndarray  # <Phi_m^R, Phi_m^R>_R = (kappa_m^R)^{-H} (kappa_m^R)^{-1}
    gram_L: np.ndarray
    kappa_R: np.ndarray
    kappa_L: np.ndarray
    sequence: VerblunskySequence


def _pd_or_raise(g: np.ndarray, m: int, tol: Tolerances) -> np.ndarray:
    g = hermitian_part(g, tol)
    w = hermitian_eig(g, tol).eigenvalues
    if w[-1] <= 0 or w[0] <= tol.pd_floor * w[-1]:
        raise ToeplitzNotPD(f"moment matrix is not positive definite at order {m}")
    return g


def _toeplitz_solve(t: np.ndarray, rhs: np.ndarray, m: int) -> np.ndarray:
    try:
        factor = scipy.linalg.cho_factor(t, lower=True)
    except np.linalg.LinAlgError:
        raise ToeplitzNotPD(f"block Toeplitz matrix of order {m} is not positive definite") from None
    return scipy.linalg.cho_solve(factor, rhs)


def orthogonal_system(mom: MomentSequence, n: int, tol: Tolerances = DEFAULT_TOLERANCES) -> OrthogonalSystem:
    """Gram-Schmidt on ``1, z, ..., z^n`` against the moments, then the parameters

        alpha_m = -(kappa_m^R)^H Phi_{m+1}^R(0)^H (kappa_m^L)^{-1}

    with the kappas fixed by ``(kappa_m^R)^{-1} kappa_{m+1}^R > 0`` and
    ``kappa_{m+1}^L (kappa_m^L)^{-1} > 0``.
    """
    if n > mom.order:
        raise ValueError(f"need moments up to order {n}, have {mom.order}")
    l = mom.dim
    eye = np.eye(l, dtype=np.complex128)
    monic_r, monic_l = [eye[None]], [eye[None]]
    gram_r, gram_l = [_pd_or_raise(mom[0], 0, tol)], [_pd_or_raise(mom[0], 0, tol)]
    # c_0 = 1 for a normalized measure, so kappa_0 = 1 as well
    kappa_r = [matrix_power_hpd(gram_r[0], -0.5, tol)]
    kappa_l = [kappa_r[0].copy()]
    alphas = []
    for m in range(1, n + 1):
        # right: sum_k c_{j-k} B_k = -c_{j-m}; left: sum_k c_{k-j} C_k^H = -c_{m-j}
        rhs_r = np.concatenate([mom[j - m] for j in range(m)])
        rhs_l = np.concatenate([mom[m - j] for j in range(m)])
        b = -_toeplitz_solve(mom.toeplitz(m), rhs_r, m).reshape(m, l, l)
        ch = -_toeplitz_solve(mom.toeplitz(m, left=True), rhs_l, m).reshape(m, l, l)
        phi_r = np.concatenate([b, eye[None]])
        phi_l = np.concatenate([adjoint(ch), eye[None]])
        g_r = _pd_or_raise(sum(mom[m - k] @ phi_r[k] for k in range(m + 1)), m, tol)
        g_l = _pd_or_raise(sum(phi_l[k] @ mom[m - k] for k in range(m + 1)), m, tol)

        kr_prev, kl_prev = kappa_r[-1], kappa_l[-1]
        alpha = -adjoint(kr_prev) @ adjoint(phi_r[0]) @ np.linalg.inv(kl_prev)
        norm = spectral_norm(alpha, tol)
        if norm >= 1.0 - tol.breakdown_margin:
            raise NonContractive(f"alpha_{m - 1} has norm {norm:.12g}: recursion broke down")
        alphas.append(alpha)

        kr_inv = np.linalg.inv(kr_prev)
        kl_inv = np.linalg.inv(kl_prev)
        g_r_inv = np.linalg.inv(g_r)
        g_l_inv = np.linalg.inv(g_l)
        p = matrix_sqrt_hpd(hermitian_part(kr_inv @ g_r_inv @ adjoint(kr_inv), tol), tol)
        q = matrix_sqrt_hpd(hermitian_part(adjoint(kl_inv) @ g_l_inv @ kl_inv, tol), tol)
        kappa_r.append(kr_prev @ p)
        kappa_l.append(q @ kl_prev)
        monic_r.append(phi_r)
        monic_l.append(phi_l)
        gram_r.append(g_r)
        gram_l.append(g_l)
    seq = VerblunskySequence(np.array(alphas).reshape(n, l, l))
    return OrthogonalSystem(monic_r, monic_l, np.array(gram_r), np.array(gram_l), np.array(kappa_r), np.array(kappa_l), seq)


def verblunsky_from_moments(mom: MomentSequence, n: int, tol: Tolerances = DEFAULT_TOLERANCES) -> VerblunskySequence:
    return orthogonal_system(mom, n, tol).sequence
