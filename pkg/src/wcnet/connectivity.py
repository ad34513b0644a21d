"""Row-sum-1 excitatory connectivity matrices and their spectra.

The coupling matrix is ``W^EE = w_e * L`` where ``L`` has zero diagonal,
non-negative entries and unit row sums.  Eigenvalues are kept sorted by
descending real part, ties broken by ascending imaginary part.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

ROW_SUM_TOL = 1e-9
MAX_EIGVEC_COND = 1e8
_TIE_TOL = 1e-9


class ConnectivityError(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class Connectivity:
    matrix: np.ndarray
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray  # columns
    first_row: np.ndarray | None = None
    label: str = field(default="custom")

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def is_circulant(self) -> bool:
        return self.first_row is not None

    def distinct_eigenvalues(self, tol: float = _TIE_TOL) -> list[complex]:
        """Eigenvalues with repeats and conjugate partners removed (Im >= 0 kept)."""
        out: list[complex] = []
        for r in self.eigenvalues:
            r = complex(r)
            if r.imag < -tol:
                r = r.conjugate()
            if not any(abs(r - s) < tol for s in out):
                out.append(r)
        return out


def _sort_spectrum(vals, vecs=None):
    # round before sorting so numerically equal real parts tie properly
    key = np.lexsort((np.round(vals.imag, 9), -np.round(vals.real, 9)))
    vals = vals[key]
    return (vals, vecs[:, key]) if vecs is not None else vals


def _check_matrix(raw) -> np.ndarray:
    mat = np.asarray(raw, dtype=float)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ConnectivityError(f"connectivity matrix must be square, got shape {mat.shape}")
    n = mat.shape[0]
    if n < 2:
        raise ConnectivityError("connectivity needs at least 2 nodes")
    if not np.all(np.isfinite(mat)):
        raise ConnectivityError("connectivity matrix has non-finite entries")
    if np.any(np.diag(mat) != 0.0):
        raise ConnectivityError("connectivity matrix must have a zero diagonal (no self-coupling)")
    if np.any(mat < 0.0):
        raise ConnectivityError("connectivity matrix must be non-negative")
    sums = mat.sum(axis=1)
    bad = np.nonzero(np.abs(sums - 1.0) > ROW_SUM_TOL)[0]
    if bad.size:
        i = int(bad[0])
        raise ConnectivityError(f"row {i} sums to {sums[i]:.12g}, expected 1")
    return mat


def from_matrix(raw, max_cond: float = MAX_EIGVEC_COND, label: str = "custom") -> Connectivity:
    """Validate a general row-sum-1 matrix and eigendecompose it numerically."""
    mat = _check_matrix(raw)
    vals, vecs = np.linalg.eig(mat)
    vecs = vecs / np.linalg.norm(vecs, axis=0)
    cond = np.linalg.cond(vecs)
    if not np.isfinite(cond) or cond > max_cond:
        raise ConnectivityError(
            f"connectivity matrix is not (numerically) diagonalizable: eigenvector condition {cond:.3g}")
    vals, vecs = _sort_spectrum(vals.astype(complex), vecs.astype(complex))
    return Connectivity(matrix=mat, eigenvalues=vals, eigenvectors=vecs, label=label)


def circulant(first_row, label: str = "circulant") -> Connectivity:
    """Circulant matrix ``circ{0, l_1, ..., l_{n-1}}`` with its analytic spectrum."""
    row = np.asarray(first_row, dtype=float)
    n = row.size
    mat = np.array([np.roll(row, i) for i in range(n)])
    _check_matrix(mat)
    k = np.arange(n)
    # column k is (1, rho_k, ..., rho_k^(n-1)); reduce the exponent mod n for accuracy
    vecs = np.exp(2j * np.pi * (np.outer(k, k) % n) / n)
    vals = vecs.T @ row.astype(complex)
    vals = np.where(np.abs(vals.imag) < 1e-12, vals.real + 0j, vals)
    vals = np.where(np.abs(vals.real) < 1e-12, 1j * vals.imag, vals)
    vals, vecs = _sort_spectrum(vals, vecs / np.sqrt(n))
    return Connectivity(matrix=mat, eigenvalues=vals, eigenvectors=vecs, first_row=row, label=label)


def uni_ring(n: int) -> Connectivity:
    """Unidirectional ring: node i listens to node i+1."""
    if n < 3:
        raise ConnectivityError(f"ring needs n >= 3, got {n}")
    row = np.zeros(n)
    row[1] = 1.0
    return circulant(row, label=f"uni:{n}")


def bi_ring(n: int) -> Connectivity:
    if n < 3:
        raise ConnectivityError(f"ring needs n >= 3, got {n}")
    row = np.zeros(n)
    row[1] += 0.5
    row[-1] += 0.5
    return circulant(row, label=f"bi:{n}")


def all_to_all(n: int) -> Connectivity:
    if n < 2:
        raise ConnectivityError(f"all-to-all needs n >= 2, got {n}")
    row = np.full(n, 1.0 / (n - 1))
    row[0] = 0.0
    return circulant(row, label=f"all:{n}")


class DominantEigenvalue(NamedTuple):
    value: complex
    multiplicity: int


def dominant_nontrivial(conn: Connectivity, tol: float = _TIE_TOL) -> list[DominantEigenvalue]:
    """Eigenvalue(s) of largest real part other than the Perron eigenvalue 1.

    Conjugate pairs are both returned; repeated real values are reported
    once with their multiplicity.
    """
    rest = [v for v in conn.eigenvalues if abs(v - 1.0) > tol]
    if not rest:
        raise ConnectivityError("all eigenvalues equal 1; no non-trivial eigenvalue")
    best = max(v.real for v in rest)
    top = [complex(v) for v in rest if abs(v.real - best) <= tol]
    out: list[DominantEigenvalue] = []
    for v in top:
        for j, d in enumerate(out):
            if abs(d.value - v) <= tol:
                out[j] = DominantEigenvalue(d.value, d.multiplicity + 1)
                break
        else:
            out.append(DominantEigenvalue(v, 1))
    return out


def from_preset(spec: str) -> Connectivity:
    """Parse ``"uni:N"``, ``"bi:N"`` or ``"all:N"``."""
    try:
        kind, n = spec.split(":")
        n = int(n)
    except ValueError:
        raise ConnectivityError(f"connectivity preset must look like 'uni:N' or 'bi:N', got {spec!r}") from None
    builders = {"uni": uni_ring, "bi": bi_ring, "all": all_to_all}
    if kind not in builders:
        raise ConnectivityError(f"unknown connectivity preset {kind!r}")
    return builders[kind](n)


def from_csv(path) -> Connectivity:
    """Read n rows of n comma-separated floats."""
    rows = [line for line in Path(path).read_text(encoding="utf-8").splitlines()
            if line.strip() and not line.lstrip().startswith("#")]
    try:
        raw = [[float(x) for x in line.split(",")] for line in rows]
    except ValueError as exc:
        raise ConnectivityError(f"{path}: {exc}") from None
    return from_matrix(raw, label=str(path))


def connectivity_from_spec(spec) -> Connectivity:
    """Preset string or a CSV path (anything containing a path separator or ending in .csv)."""
    if isinstance(spec, Connectivity):
        return spec
    if isinstance(spec, str) and (spec.endswith(".csv") or "/" in spec):
        return from_csv(spec)
    if isinstance(spec, str):
        return from_preset(spec)
    return from_matrix(spec)
