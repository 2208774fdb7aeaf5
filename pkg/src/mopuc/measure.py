"""Matrix probability measures on the unit circle.

A measure is an absolutely continuous part, given either by samples of the
density on a uniform grid ``theta_j = 2 pi j / N`` or by the Fourier
coefficients of a trigonometric matrix density, plus finitely many atoms.
Densities are taken with respect to ``d theta / 2 pi``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

import numpy as np

from mopuc.config import DEFAULT_TOLERANCES, Tolerances
from mopuc.errors import (
    DimMismatch,
    NotNonnegative,
    NotNormalized,
    NotPositiveDefinite,
    NyquistViolation,
    OffGridAngle,
    ParseError,
    ValidationError,
)
from mopuc.matlin import adjoint, as_matrix, hermitian_eig, hermitian_part, matrix_power_hpd

TWO_PI = 2.0 * math.pi


def grid_angles(n: int) -> np.ndarray:
    return TWO_PI * np.arange(n) / n


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.ascontiguousarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class MatrixMeasure:
    """Immutable matrix measure; build it with :func:`grid_measure`,
    :func:`fourier_measure` or :func:`parse_measure` so the invariants are checked."""

    dim: int
    kind: str  # "grid" or "fourier"
    samples: np.ndarray | None = None  # (N, l, l) density on the grid
    coeffs: np.ndarray | None = None  # (K+1, l, l): F_0..F_K, F_{-k} = F_k^H
    atom_angles: np.ndarray = field(default_factory=lambda: np.zeros(0))
    atom_masses: np.ndarray | None = None  # (m, l, l)
    # atoms are located at 2 pi - atom_angles when set; keeps conjugation an exact involution
    atoms_reflected: bool = False

    @property
    def grid_size(self) -> int | None:
        return None if self.samples is None else self.samples.shape[0]

    @property
    def atoms(self) -> list[tuple[float, np.ndarray]]:
        out = []
        for theta, mass in zip(self.atom_angles, self.atom_masses):
            t = float(theta)
            if self.atoms_reflected and t != 0.0:
                t = TWO_PI - t
            out.append((t, mass))
        return out

    def total_mass(self) -> np.ndarray:
        if self.kind == "grid":
            ac = np.mean(self.samples, axis=0)
        else:
            ac = self.coeffs[0].copy()
        return ac + np.sum(self.atom_masses, axis=0)

    def density_samples(self, n: int | None = None) -> np.ndarray:
        """Density on the uniform grid of size ``n`` (grid measures: their own grid)."""
        if self.kind == "grid":
            if n is not None and n != self.grid_size:
                raise DimMismatch(f"measure is sampled on N={self.grid_size}, requested N={n}")
            return self.samples
        n = DEFAULT_TOLERANCES.default_grid if n is None else n
        return _eval_fourier(self.coeffs, grid_angles(n))


def _eval_fourier(coeffs: np.ndarray, theta: np.ndarray) -> np.ndarray:
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    out = np.broadcast_to(coeffs[0], (theta.size,) + coeffs[0].shape).astype(np.complex128)
    for k in range(1, coeffs.shape[0]):
        e = np.exp(1j * k * theta)[:, None, None]
        out = out + e * coeffs[k] + np.conj(e) * adjoint(coeffs[k])
    return 0.5 * (out + adjoint(out))


def _check_nonneg(mats: np.ndarray, what: str, tol: Tolerances) -> np.ndarray:
    mats = hermitian_part(mats, tol)
    if mats.shape[0] == 0:
        return mats
    w = hermitian_eig(mats, tol).eigenvalues
    scale = np.maximum(1.0, np.max(np.abs(w), axis=-1))
    bad = np.nonzero(w[..., 0] < -tol.eig_tol * scale)[0]
    if bad.size:
        j = int(bad[0])
        raise NotNonnegative(f"{what} {j} has eigenvalue {w[j, 0]:.6g} < 0")
    return mats


def _prepare_atoms(atoms: Iterable[tuple[float, object]], dim: int, tol: Tolerances):
    atoms = list(atoms)
    angles = np.array([float(t) for t, _ in atoms], dtype=float)
    masses = (
        as_matrix(np.array([np.asarray(m, dtype=np.complex128) for _, m in atoms]), dim)
        if atoms
        else np.zeros((0, dim, dim), dtype=np.complex128)
    )
    if np.any(~np.isfinite(angles)) or np.any((angles < 0.0) | (angles >= TWO_PI)):
        raise ValidationError("atom angles must lie in [0, 2pi)")
    if len(np.unique(angles)) != len(angles):
        raise ValidationError("atom angles must be pairwise distinct")
    masses = _check_nonneg(masses, "atom", tol)
    return angles, masses


def _normalizer(total: np.ndarray, tol: Tolerances) -> np.ndarray:
    try:
        return matrix_power_hpd(total, -0.5, tol)
    except NotPositiveDefinite as exc:
        raise NotNormalized(f"total mass is singular and cannot be normalized: {exc}") from None


def _certify(measure: MatrixMeasure, tol: Tolerances) -> MatrixMeasure:
    err = np.max(np.abs(measure.total_mass() - np.eye(measure.dim)))
    if err > tol.norm_tol:
        raise NotNormalized(f"total mass differs from the identity by {err:.3e}")
    return measure


def grid_measure(
    samples,
    atoms: Iterable[tuple[float, object]] = (),
    normalize: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MatrixMeasure:
    samples = as_matrix(samples)
    if samples.ndim != 3:
        raise DimMismatch("grid samples must have shape (N, l, l)")
    n, dim = samples.shape[0], samples.shape[-1]
    if n < 2 or n & (n - 1):
        raise ValidationError(f"grid size must be a power of two, got {n}")
    samples = _check_nonneg(samples, "density sample", tol)
    angles, masses = _prepare_atoms(atoms, dim, tol)
    if normalize:
        total = np.mean(samples, axis=0) + np.sum(masses, axis=0)
        s = _normalizer(total, tol)
        samples = hermitian_part(s @ samples @ s)
        masses = hermitian_part(s @ masses @ s) if len(masses) else masses
    m = MatrixMeasure(dim, "grid", samples=_frozen(samples), atom_angles=_frozen(angles), atom_masses=_frozen(masses))
    return _certify(m, tol)


def fourier_measure(
    coeffs,
    atoms: Iterable[tuple[float, object]] = (),
    normalize: bool = False,
    tol: Tolerances = DEFAULT_TOLERANCES,
) -> MatrixMeasure:
    """``coeffs[k]`` is the matrix multiplying ``exp(i k theta)`` for ``k >= 0``."""
    coeffs = as_matrix(coeffs)
    if coeffs.ndim != 3 or coeffs.shape[0] == 0:
        raise DimMismatch("Fourier coefficients must have shape (K+1, l, l)")
    dim = coeffs.shape[-1]
    coeffs = coeffs.copy()
    coeffs[0] = hermitian_part(coeffs[0], tol)
    _check_nonneg(_eval_fourier(coeffs, grid_angles(tol.default_grid)), "density sample", tol)
    angles, masses = _prepare_atoms(atoms, dim, tol)
    if normalize:
        s = _normalizer(coeffs[0] + np.sum(masses, axis=0), tol)
        coeffs = s @ coeffs @ s
        coeffs[0] = hermitian_part(coeffs[0])
        masses = hermitian_part(s @ masses @ s) if len(masses) else masses
    m = MatrixMeasure(dim, "fourier", coeffs=_frozen(coeffs), atom_angles=_frozen(angles), atom_masses=_frozen(masses))
    return _certify(m, tol)


def lebesgue(dim: int, n: int | None = None) -> MatrixMeasure:
    """Normalized Lebesgue measure ``1 d theta / 2 pi``; on a grid when ``n`` is given."""
    if n is None:
        return fourier_measure(np.eye(dim)[None])
    return grid_measure(np.broadcast_to(np.eye(dim), (n, dim, dim)))


def with_atoms(measure: MatrixMeasure, atoms, ac_weight: float, tol: Tolerances = DEFAULT_TOLERANCES) -> MatrixMeasure:
    """Mixture ``ac_weight * measure + atoms`` (the caller keeps the total at one)."""
    atoms = list(measure.atoms) + list(atoms)
    if measure.kind == "grid":
        return grid_measure(ac_weight * measure.samples, atoms, tol=tol)
    return fourier_measure(ac_weight * measure.coeffs, atoms, tol=tol)


def measure_from_alphas(alphas, n: int | None = None, tol: Tolerances = DEFAULT_TOLERANCES) -> MatrixMeasure:
    """Right Bernstein-Szego measure ``[phi_n^{R,*}(z)^H phi_n^{R,*}(z)]^{-1} d theta / 2 pi``
    sampled on the uniform grid of size ``n``."""
    from mopuc.polynomials import VerblunskySequence, circle_values

    seq = alphas if isinstance(alphas, VerblunskySequence) else VerblunskySequence(alphas)
    seq.require_strict(tol)
    n = tol.default_grid if n is None else n
    _, rstar = circle_values(seq, grid_angles(n))
    gram = hermitian_part(adjoint(rstar) @ rstar)
    dens = matrix_power_hpd(gram, -1.0, tol)
    # normalization of the Bernstein-Szego density holds to quadrature accuracy
    return grid_measure(dens, tol=tol.with_overrides(norm_tol=max(tol.norm_tol, tol.quad_tol)))


@dataclass(frozen=True, eq=False)
class MomentSequence:
    """``c_k = int exp(-i k theta) d sigma`` for ``k = 0..K``; ``c_{-k} = c_k^H``."""

    dim: int
    c: np.ndarray  # (K+1, l, l)

    @property
    def order(self) -> int:
        return self.c.shape[0] - 1

    def __getitem__(self, k: int) -> np.ndarray:
        if abs(k) > self.order:
            raise IndexError(f"moment {k} beyond order {self.order}")
        return self.c[k] if k >= 0 else adjoint(self.c[-k])

    def toeplitz(self, m: int, left: bool = False) -> np.ndarray:
        """Block matrix ``[c_{j-k}]`` (``[c_{k-j}]`` when ``left``) for ``0 <= j, k < m``."""
        l = self.dim
        sign = -1 if left else 1
        t = np.empty((m * l, m * l), dtype=np.complex128)
        for j in range(m):
            for k in range(m):
                t[j * l : (j + 1) * l, k * l : (k + 1) * l] = self[sign * (j - k)]
        return t


def moments(measure: MatrixMeasure, order: int) -> MomentSequence:
    if order < 0:
        raise ValueError("moment order must be nonnegative")
    l = measure.dim
    c = np.zeros((order + 1, l, l), dtype=np.complex128)
    if measure.kind == "grid":
        n = measure.grid_size
        if order > n // 2 - 1:
            raise NyquistViolation(f"order {order} exceeds N/2 - 1 = {n // 2 - 1} for N={n}")
        # exact angle reduction: k*j mod N
        kj = (np.arange(order + 1)[:, None] * np.arange(n)[None, :]) % n
        e = np.exp(-1j * TWO_PI * kj / n)
        c += (e @ measure.samples.reshape(n, l * l)).reshape(order + 1, l, l) / n
    else:
        kmax = min(order, measure.coeffs.shape[0] - 1)
        c[: kmax + 1] += measure.coeffs[: kmax + 1]
    for theta, mass in measure.atoms:
        c += np.exp(-1j * np.arange(order + 1) * theta)[:, None, None] * mass
    c[0] = 0.5 * (c[0] + adjoint(c[0]))
    return MomentSequence(l, _frozen(c))


def conjugate_measure(measure: MatrixMeasure) -> MatrixMeasure:
    """``sigma_bar(E) = sigma(conj E)``: reflect theta to 2 pi - theta."""
    if measure.kind == "grid":
        n = measure.grid_size
        if n % 2:
            raise ValidationError("conjugation needs an even grid")
        idx = (-np.arange(n)) % n
        return MatrixMeasure(
            measure.dim,
            "grid",
            samples=_frozen(measure.samples[idx]),
            atom_angles=measure.atom_angles,
            atom_masses=measure.atom_masses,
            atoms_reflected=not measure.atoms_reflected,
        )
    return MatrixMeasure(
        measure.dim,
        "fourier",
        coeffs=_frozen(adjoint(measure.coeffs)),
        atom_angles=measure.atom_angles,
        atom_masses=measure.atom_masses,
        atoms_reflected=not measure.atoms_reflected,
    )


def density_at(measure: MatrixMeasure, theta: float) -> np.ndarray:
    """Density of the absolutely continuous part at ``theta``; atoms never contribute."""
    if not (0.0 <= theta < TWO_PI):
        raise ValidationError(f"angle {theta} outside [0, 2pi)")
    if measure.kind == "grid":
        n = measure.grid_size
        pos = theta * n / TWO_PI
        j = int(round(pos))
        if abs(pos - j) > 1e-9 * max(1.0, pos):
            raise OffGridAngle(f"angle {theta} is not a point of the N={n} grid")
        return measure.samples[j % n].copy()
    return _eval_fourier(measure.coeffs, np.array([theta]))[0]


def measures_equal(a: MatrixMeasure, b: MatrixMeasure) -> bool:
    """Bitwise equality of the stored representation (the reflection flag only matters with atoms)."""

    def same(x, y):
        return (x is None and y is None) or (x is not None and y is not None and np.array_equal(x, y))

    return (
        a.dim == b.dim
        and a.kind == b.kind
        and same(a.samples, b.samples)
        and same(a.coeffs, b.coeffs)
        and same(a.atom_angles, b.atom_angles)
        and same(a.atom_masses, b.atom_masses)
        and (len(a.atom_angles) == 0 or a.atoms_reflected == b.atoms_reflected)
    )


# ---------------------------------------------------------------- JSON I/O


def decode_matrix(obj, dim: int) -> np.ndarray:
    """Matrix from a flat row-major list of ``l*l`` entries or a list of ``l`` rows;
    an entry is ``[re, im]`` or a real number."""
    if not isinstance(obj, list):
        raise ParseError(f"matrix must be a list, got {type(obj).__name__}")
    if len(obj) == dim * dim and all(_is_entry(e) for e in obj):
        flat = obj
    elif len(obj) == dim and all(isinstance(r, list) and len(r) == dim and all(map(_is_entry, r)) for r in obj):
        flat = [e for row in obj for e in row]
    else:
        raise ParseError(f"cannot read a {dim}x{dim} matrix from {obj!r:.80}")
    vals = [complex(e) if _is_real(e) else complex(e[0], e[1]) for e in flat]
    return np.array(vals, dtype=np.complex128).reshape(dim, dim)


def _is_real(e) -> bool:
    return isinstance(e, (int, float)) and not isinstance(e, bool)


def _is_entry(e) -> bool:
    return _is_real(e) or (isinstance(e, list) and len(e) == 2 and all(map(_is_real, e)))


def encode_matrix(m: np.ndarray) -> list:
    return [[float(z.real), float(z.imag)] for z in np.asarray(m).ravel()]


def parse_measure(doc: dict, tol: Tolerances = DEFAULT_TOLERANCES) -> MatrixMeasure:
    try:
        ell = doc["ell"]
        if not isinstance(ell, int) or ell < 1:
            raise ParseError(f"'ell' must be a positive integer, got {ell!r}")
        normalize = bool(doc.get("normalize", False))
        atoms = [(float(a["theta"]), decode_matrix(a["mass"], ell)) for a in doc.get("atoms", [])]
        ac = doc.get("ac")
        if ac is None:
            return fourier_measure(np.zeros((1, ell, ell)), atoms, normalize, tol)
        kind = ac.get("kind")
        if kind == "grid":
            samples = np.array([decode_matrix(s, ell) for s in ac["samples"]])
            if "n" in ac and ac["n"] != len(samples):
                raise ParseError(f"grid declares n={ac['n']} but has {len(samples)} samples")
            return grid_measure(samples, atoms, normalize, tol)
        if kind == "fourier":
            return fourier_measure(_fourier_from_json(ac["coeffs"], ell, tol), atoms, normalize, tol)
        if kind == "bernstein_szego":
            from mopuc.polynomials import VerblunskySequence

            alphas = [decode_matrix(a, ell) for a in ac.get("alphas", [])]
            seq = VerblunskySequence(np.array(alphas).reshape(len(alphas), ell, ell))
            bs = measure_from_alphas(seq, ac.get("n"), tol)
            if not atoms and not normalize:
                return bs
            return grid_measure(bs.samples, atoms, normalize, tol)
        raise ParseError(f"unknown ac kind {kind!r}")
    except (KeyError, TypeError, AttributeError) as exc:
        raise ParseError(f"malformed measure document: {exc!r}") from None


def _fourier_from_json(raw: dict, ell: int, tol: Tolerances) -> np.ndarray:
    given = {}
    for key, value in raw.items():
        try:
            k = int(key)
        except ValueError:
            raise ParseError(f"Fourier index {key!r} is not an integer") from None
        given[k] = decode_matrix(value, ell)
    kmax = max((abs(k) for k in given), default=0)
    coeffs = np.zeros((kmax + 1, ell, ell), dtype=np.complex128)
    for k in range(kmax + 1):
        pos, neg = given.get(k), given.get(-k)
        if k == 0:
            if pos is not None:
                coeffs[0] = pos
            continue
        if pos is not None and neg is not None:
            if np.max(np.abs(adjoint(neg) - pos)) > tol.hermitian_tol * (1 + np.max(np.abs(pos))):
                raise ParseError(f"coefficients {k} and {-k} are not adjoint")
            coeffs[k] = pos
        elif pos is not None:
            coeffs[k] = pos
        elif neg is not None:
            coeffs[k] = adjoint(neg)
    return coeffs


def load_measure(path, tol: Tolerances = DEFAULT_TOLERANCES) -> MatrixMeasure:
    try:
        doc = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise ParseError(f"cannot read measure file {path}: {exc}") from None
    if not isinstance(doc, dict):
        raise ParseError("measure file must contain a JSON object")
    return parse_measure(doc, tol)


def measure_to_dict(measure: MatrixMeasure) -> dict:
    if measure.kind == "grid":
        ac = {"kind": "grid", "n": measure.grid_size, "samples": [encode_matrix(s) for s in measure.samples]}
    else:
        ac = {"kind": "fourier", "coeffs": {str(k): encode_matrix(c) for k, c in enumerate(measure.coeffs)}}
    return {
        "ell": measure.dim,
        "normalize": False,
        "ac": ac,
        "atoms": [{"theta": t, "mass": encode_matrix(m)} for t, m in measure.atoms],
    }
